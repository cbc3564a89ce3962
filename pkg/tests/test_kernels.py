"""The compiled kernels and the numpy fallback must agree."""
import importlib
import os
import subprocess
import sys

import numpy as np
import pytest

from infproj import _kernels_py as ref
from infproj import kernels
from infproj.synthetic import make_a9a_like, make_logistic_data

compiled = pytest.importorskip("infproj._kernels")


@pytest.fixture(scope="module")
def arrays():
    d = make_logistic_data(60, 9, seed=5, density=0.6)
    return d.indptr, d.indices, d.data, d.labels, d


@pytest.mark.parametrize("kind", [ref.LOGISTIC, ref.TRUNCATED])
def test_loss_dloss(kind):
    m = np.linspace(-800, 800, 1001)
    a, b = ref.loss_dloss(m, kind, 2.0), compiled.loss_dloss(m, kind, 2.0)
    assert np.allclose(a[0], b[0], rtol=1e-14, atol=0) and np.allclose(a[1], b[1], rtol=1e-14, atol=1e-300)
    assert np.all(np.isfinite(a[0])) and np.all(a[0] >= 0)


@pytest.mark.parametrize("kind", [ref.LOGISTIC, ref.TRUNCATED])
def test_accumulate_and_losses(arrays, kind, rng):
    indptr, indices, data, labels, d = arrays
    rows = rng.integers(0, d.n, 25)
    x = rng.normal(size=d.dim)
    w = rng.random(25)
    for weights in (None, w):
        o1, o2 = np.zeros(d.dim), np.zeros(d.dim)
        s_a = ref.accumulate_grad(indptr, indices, data, labels, rows, x, kind, 3.0, 0.7, 0.2, weights, o1)
        s_b = compiled.accumulate_grad(indptr, indices, data, labels, rows, x, kind, 3.0, 0.7, 0.2, weights, o2)
        assert np.allclose(o1, o2, rtol=1e-12, atol=1e-14)
        assert np.allclose(s_a, s_b, rtol=1e-12)
    assert np.allclose(ref.batch_losses(indptr, indices, data, labels, rows, x, kind, 3.0),
                       compiled.batch_losses(indptr, indices, data, labels, rows, x, kind, 3.0), rtol=1e-13)


@pytest.mark.parametrize("const", [False, True])
def test_stage_kernels(arrays, rng, const):
    indptr, indices, data, labels, d = arrays
    T = 40
    etas = 3.0 / (0.5 * (np.arange(1, T + 1) + 1.0))
    shape = (1, d.n) if const else (T, 4)
    rg = np.arange(d.n)[None, :] if const else rng.integers(0, d.n, shape)
    rl = np.arange(d.n)[None, :] if const else rng.integers(0, d.n, shape)
    z1, xk = rng.normal(size=d.dim), rng.normal(size=d.dim)
    args = (indptr, indices, data, labels, ref.LOGISTIC, 1.0, 0.8, z1, xk, 0.6, 0.5, etas, rg, rl, -np.inf, np.inf)
    assert np.allclose(ref.spg_x_stage(*args), compiled.spg_x_stage(*args), rtol=1e-11, atol=1e-13)
    yargs = (indptr, indices, data, labels, ref.TRUNCATED, 2.0, 0.8, xk, 0.3, 1.0, etas, rl, 0.0, 5.0)
    assert ref.spg_y_stage(*yargs) == pytest.approx(compiled.spg_y_stage(*yargs), rel=1e-12)


def test_backend_selected():
    assert kernels.BACKEND in kernels.available_backends()
    assert "python" in kernels.available_backends()


def test_pure_python_env_switch():
    code = "import infproj.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, INFPROJ_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_benchmark_script_runs(tmp_path):
    import json
    import pathlib
    import runpy

    script = pathlib.Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    mod = runpy.run_path(str(script))
    mod["main"](["--n", "500", "--repeat", "1", "--json", str(tmp_path / "b.json")])
    table = json.loads((tmp_path / "b.json").read_text())["seconds"]
    assert set(table) >= {"batch_losses[full]", "spg_x_stage[T=200,b=10]"}

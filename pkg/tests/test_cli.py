import json
import os
import subprocess
import sys

import numpy as np
import pytest

from infproj.cli import EXIT_CONFIG, EXIT_DIVERGED, EXIT_FAIL, EXIT_OK, load_data, main, thread_cap
from infproj.trace import read_long_csv, read_trace


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


SMALL = {"data": {"synthetic": "a9a_like", "n": 3000, "seed": 1}, "problem": {"lambda": 0.1}}


def test_run_twice_byte_identical(tmp_path):
    cfg = _write(tmp_path, {**SMALL, "solver": "st_spg", "params": {"K": 30}, "seed": 5, "log_every": 3})
    for out in ("a", "b"):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / out)]) == EXIT_OK
    for f in ("trace.csv",):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    recs = read_trace(tmp_path / "a" / "trace.csv", tmp_path / "a" / "timing.csv")
    assert [r.stage_or_iter for r in recs] == list(range(3, 31, 3))
    cpu = [r.cpu_seconds for r in recs]
    assert cpu == sorted(cpu)


def test_seed_flag_overrides(tmp_path):
    cfg = _write(tmp_path, {"data": SMALL["data"], "solver": "sgd_erm", "params": {"T": 200}, "log_every": 50})
    main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
    assert (tmp_path / "a" / "trace.csv").read_bytes() != (tmp_path / "b" / "trace.csv").read_bytes()
    assert json.loads((tmp_path / "b" / "summary.json").read_text())["seed"] == 2


def test_sgd_lambda_warning(tmp_path):
    cfg = _write(tmp_path, {**SMALL, "solver": "sgd_erm", "params": {"T": 20}})
    with pytest.warns(UserWarning, match="lambda"):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK


def test_summary_errors_match_recount(tmp_path):
    doc = {**SMALL, "solver": "st_spg", "params": {"K": 40}, "split": {"train_fraction": 0.7, "seed": 3}}
    cfg = _write(tmp_path, doc)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    train, test = load_data(doc)
    fin = summary["final"]
    x = np.array(fin["x"])

    def count(ds):
        wrong = 0
        for i in range(ds.n):
            lo, hi = ds.X.indptr[i], ds.X.indptr[i + 1]
            score = sum(ds.X.data[j] * x[ds.X.indices[j]] for j in range(lo, hi))
            wrong += (1.0 if score >= 0 else -1.0) != ds.labels[i]
        return wrong / ds.n

    assert fin["train_error"] == pytest.approx(count(train), abs=1e-12)
    assert fin["test_error"] == pytest.approx(count(test), abs=1e-12)
    assert summary["n_train"] == train.n and summary["status"] == "ok"
    assert {"wall_seconds", "seed", "config", "tau"} <= set(summary)


def test_dense_trace(tmp_path):
    cfg = _write(tmp_path, {**SMALL, "solver": "st_spg", "params": {"K": 3}})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o"), "--dense-trace"]) == EXIT_OK
    lines = (tmp_path / "o" / "dense_trace.csv").read_text().splitlines()
    assert lines[0] == "stage,inner_iter,subproblem_objective" and len(lines) > 10


def test_divergence_keeps_partial_trace(tmp_path):
    doc = {"data": {"synthetic": "logistic", "n": 200, "d": 5}, "solver": "mspg",
           "params": {"T": 200, "L_override": 1e-308}, "log_every": 1}
    out = tmp_path / "o"
    assert main(["run", "--config", _write(tmp_path, doc), "--out", str(out)]) == EXIT_DIVERGED
    assert len(read_trace(out / "trace.csv")) >= 1
    assert json.loads((out / "summary.json").read_text())["status"] == "diverged"


def test_config_errors_exit_2(tmp_path, capsys):
    bad = _write(tmp_path, {**SMALL, "solver": "st_spg", "params": {"K": 3, "nope": 1}})
    assert main(["run", "--config", bad]) == EXIT_CONFIG
    assert "nope" in capsys.readouterr().err
    grid = _write(tmp_path, {**SMALL, "solver": "bmd", "params": {"rho": "10^{0:1}"}}, "g.json")
    assert main(["run", "--config", grid]) == EXIT_CONFIG
    missing = _write(tmp_path, {"data": {"path": str(tmp_path / "none")}, "solver": "bmd"}, "m.json")
    assert main(["run", "--config", missing]) == EXIT_CONFIG
    empty = _write(tmp_path, {**SMALL, "solvers": []}, "e.json")
    assert main(["bench", "--config", empty]) == EXIT_CONFIG


def test_bench_identical_entries(tmp_path):
    entry = {"solver": "bmd", "params": {"T": 200, "rho": 1.0, "eta_p": 1e-4}}
    doc = {**SMALL, "solvers": [entry, entry, {"solver": "st_spg", "params": {"K": 20}}],
           "log_every": 20, "log_x": True}
    out = tmp_path / "o"
    assert main(["bench", "--config", _write(tmp_path, doc), "--out", str(out)]) == EXIT_OK
    runs = read_long_csv(out / "bench.csv")
    assert list(runs) == ["bmd", "bmd#2", "st_spg"]
    a, b = runs["bmd"], runs["bmd#2"]
    assert [(r.train_error, r.test_error, r.objective_F) for r in a] == \
           [(r.train_error, r.test_error, r.objective_F) for r in b]
    assert all("dual_seconds" in r.extras for r in a)
    svg = (out / "bench.svg").read_text()
    assert svg.count("<polyline") == 6
    summary = json.loads((out / "summary.json").read_text())
    assert summary["partial"] is False


def test_bench_grid_and_partial_failure(tmp_path):
    doc = {"data": {"synthetic": "logistic", "n": 200, "d": 5},
           "solvers": [{"solver": "sgd_erm", "params": {"T": 50, "eta": "10^{-1:0}"}},
                       {"solver": "mspg", "label": "bad", "params": {"T": 50, "L_override": 1e-308}}]}
    out = tmp_path / "o"
    assert main(["bench", "--config", _write(tmp_path, doc), "--out", str(out)]) == EXIT_FAIL
    summary = json.loads((out / "summary.json").read_text())
    assert summary["partial"] and summary["failed"] == ["bad"]
    assert sorted(read_long_csv(out / "bench.csv")) == ["sgd_erm[eta=0.1]", "sgd_erm[eta=1]"]


def test_check_default_and_single_suite(capsys):
    assert main(["check", "--suite", "lemma1"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3 and all(line.startswith("PASS lemma1.") for line in lines)
    assert main(["check"]) == EXIT_OK


def test_check_negative_control(capsys):
    rc = main(["check", "--suite", "gradients", "--json", "--inject-fault", "wrong-sign-gradient"])
    assert rc != 0
    report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert report["failures"] and all(f["operation"] == "finite_diff_audit" for f in report["failures"])
    assert main(["check", "--suite", "nope"]) == EXIT_CONFIG


def test_parse(tmp_path, capsys):
    good = tmp_path / "g.svm"
    good.write_text("+1 1:1 3:0.5\n-1 2:1\n")
    assert main(["parse", str(good)]) == EXIT_OK
    assert "samples=2 dim=3 nnz=3" in capsys.readouterr().out
    bad = tmp_path / "b.svm"
    bad.write_text("+1 1:1\n-1 0:x\n")
    assert main(["parse", str(bad)]) == EXIT_FAIL
    assert "line 2" in capsys.readouterr().err


def test_synth_round_trip(tmp_path, capsys):
    path = tmp_path / "s.svm"
    assert main(["synth", str(path), "--n", "500"]) == EXIT_OK
    assert main(["parse", str(path)]) == EXIT_OK
    assert "samples=500 dim=123" in capsys.readouterr().out


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("INFPROJ_THREADS", "3")
    assert thread_cap() == 3
    for bad in ("0", "many"):
        monkeypatch.setenv("INFPROJ_THREADS", bad)
        with pytest.raises(Exception, match="INFPROJ_THREADS"):
            thread_cap()


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "infproj.cli", "check", "--suite", "invariants"],
                          capture_output=True, text=True, env={**os.environ, "INFPROJ_THREADS": "1"})
    assert proc.returncode == 0, proc.stderr

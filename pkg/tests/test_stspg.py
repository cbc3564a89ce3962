import math

import numpy as np
import pytest

from infproj.errors import ModeMismatchError
from infproj.problem import DomainY, VarianceRegProblem
from infproj.spg import SpgConfig, spg
from infproj.stspg import (StSpgConfig, SubproblemMode, SubproblemX, approx_stage_solution,
                           build_subproblem_x, build_subproblem_y, sample_stage, st_spg, stage_budgets,
                           stage_probabilities)
from infproj.synthetic import make_logistic_data, make_quadratic_infproj


@pytest.fixture(scope="module")
def var50():
    return VarianceRegProblem(make_logistic_data(50, 5, seed=1), 1.0)


@pytest.fixture(scope="module")
def quad():
    return make_quadratic_infproj(n=300, d=4, seed=2)


def test_mode_mismatch(var50, quad):
    with pytest.raises(ModeMismatchError):
        build_subproblem_x(var50, np.zeros(5), 0.1, SubproblemMode.BICONVEX)
    with pytest.raises(ModeMismatchError):
        build_subproblem_x(quad, np.zeros(4), -0.1, SubproblemMode.DC_LINEARIZED)
    free = make_quadratic_infproj(n=50, d=3, domain_y=DomainY.FREE)
    with pytest.raises(ModeMismatchError):
        st_spg(free, StSpgConfig(K=1, gamma=1.0, mu=1.0))


def test_zero_y_reduces_to_g(var50, quad, rng):
    for prob in (var50, quad):
        xk, x = rng.normal(size=(2, prob.dim_x))
        for mode in SubproblemMode:
            o = SubproblemX(prob, xk, 0.0, mode, full_batch=True)
            assert np.allclose(o.grad(x), prob.g_value_grad(x)[1], atol=1e-15)


def test_linearization_exact_at_base_point(var50, rng):
    xk = rng.normal(size=5)
    dc = SubproblemX(var50, xk, 0.7, SubproblemMode.DC_LINEARIZED)
    bi = SubproblemX(var50, xk, 0.7, SubproblemMode.BICONVEX)
    assert np.array_equal(dc.grad(xk), bi.grad(xk))
    assert dc.value(xk) == pytest.approx(bi.value(xk), rel=1e-14)


def test_dc_oracle_against_hand_assembly(rng):
    d = make_logistic_data(5, 4, seed=9)
    lam = 1.3
    prob = VarianceRegProblem(d, lam)
    A = d.X.toarray() * d.labels[:, None]
    xk, x, yk = rng.normal(size=(3, 4)) + 0.0
    yk = 0.4

    def parts(z):
        m = A @ z
        l = np.logaddexp(0, -m)
        dl = -1.0 / (1.0 + np.exp(m))
        return l, dl[:, None] * A

    l, J = parts(x)
    grad_g = np.mean((1 + lam * l)[:, None] * J, axis=0)
    _, Jk = parts(xk)
    expect = grad_g - yk * lam * Jk.mean(axis=0)
    o = build_subproblem_x(prob, xk, yk, full_batch=True)
    assert np.allclose(o.grad(x), expect, rtol=1e-12, atol=1e-12)


def test_majorization_for_convex_loss(var50, rng):
    for _ in range(200):
        xk, x = rng.normal(scale=2, size=(2, 5))
        yk = rng.uniform(0, 3)
        o = SubproblemX(var50, xk, yk, SubproblemMode.DC_LINEARIZED)
        assert o.value(x) >= var50.g_value_grad(x)[0] - yk * var50.ell_value(x) - 1e-12


def test_y_stage_closed_form(var50, rng):
    x, yk, mu = rng.normal(size=5), 0.3, 2.0
    oy = build_subproblem_y(var50, x, full_batch=True)
    out = spg(oy, [yk], SpgConfig(4000, mu))[0]
    lbar = var50.losses(x).mean()
    assert out == pytest.approx(max(0.0, (var50.lam * lbar + mu * yk) / (var50.lam + mu)), abs=1e-4)
    assert oy.grad(np.array([lbar]))[0] == pytest.approx(0.0, abs=1e-15)


def test_y_stage_feasible_with_zero_lambda(rng):
    prob = VarianceRegProblem(make_logistic_data(10, 3), 0.0)
    r = st_spg(prob, StSpgConfig(K=5, gamma=1.0, mu=1.0, seed=1))
    assert all(s.y_next >= 0 for s in r.snapshots)


def test_schedules():
    assert stage_budgets(4, 0.5, 1.0) == (9, 5)
    assert stage_budgets(3, 0.1, 0.3) == (31, 11)
    assert stage_budgets(7, 1.0, 2.0, schedule=12) == (12, 12)
    for k in range(1, 200):
        for g in (0.1, 0.2, 0.3, 0.7, 1.0, 3.0):
            assert stage_budgets(k, g, g)[0] == math.ceil(round(k / g, 9)) + 1


def test_sampling_probabilities():
    assert np.allclose(stage_probabilities(3, 1.0), [1 / 6, 2 / 6, 3 / 6])
    draws = sample_stage(np.random.default_rng(0), 4, 2.0, size=1000)
    assert draws.min() >= 1 and draws.max() <= 4


def test_config_validation():
    with pytest.raises(ValueError):
        StSpgConfig(K=0, gamma=1, mu=1)
    with pytest.raises(ValueError):
        StSpgConfig(K=1, gamma=1, mu=1, alpha_samp=0.5)
    with pytest.raises(ValueError):
        StSpgConfig(K=1, gamma=-1, mu=1)


def test_deterministic_convergence_and_monotone(var50):
    r = st_spg(var50, StSpgConfig(K=200, gamma=0.5, mu=1.0, full_batch=True))
    assert np.linalg.norm(var50.full_gradient_F(r.x_last)) <= 1e-3
    assert all(s.y_k >= 0 and s.y_next >= 0 for s in r.snapshots)
    F = np.array([s.F_next for s in r.snapshots])
    J = np.array([s.joint_next for s in r.snapshots])
    assert np.all(np.diff(F) <= 1e-9) and np.all(np.diff(J) <= 1e-9)
    assert len(r.snapshots) == 200 and 1 <= r.tau <= 200
    assert np.array_equal(r.x_tau, r.snapshots[r.tau - 1].x_next)
    assert np.array_equal(r.x_tau_start, r.snapshots[r.tau - 1].x_k)


def test_biconvex_mode_converges(quad):
    r = st_spg(quad, StSpgConfig(K=200, gamma=5.0, mu=1.0, full_batch=True))
    assert np.linalg.norm(quad.full_gradient_F(r.x_last)) <= 1e-2
    assert np.allclose(r.x_last, quad.stationary_point(), atol=0.05)
    assert all(s.y_next <= 0 for s in r.snapshots)


def test_seed_reproducible(var50):
    cfg = dict(K=20, gamma=0.5, mu=1.0, batch_size=3, seed=11)
    a, b = st_spg(var50, StSpgConfig(**cfg)), st_spg(var50, StSpgConfig(**cfg))
    for s, t in zip(a.snapshots, b.snapshots):
        assert np.array_equal(s.x_next, t.x_next) and s.y_next == t.y_next
    assert a.tau == b.tau


def test_fused_matches_python_loop(var50):
    # dense_trace forces the per-iteration Python loop; the draws are shared
    cfg = dict(K=15, gamma=0.5, mu=1.0, batch_size=4, seed=3)
    fused = st_spg(var50, StSpgConfig(**cfg))
    loop = st_spg(var50, StSpgConfig(**cfg, dense_trace=True))
    assert loop.dense_trace and loop.dense_trace[0][:2] == (1, 1)
    for s, t in zip(fused.snapshots, loop.snapshots):
        assert np.allclose(s.x_next, t.x_next, rtol=1e-10, atol=1e-12)
        assert s.y_next == pytest.approx(t.y_next, rel=1e-10)


def test_proximal_point_diagnostic(var50):
    r = st_spg(var50, StSpgConfig(K=30, gamma=0.5, mu=1.0, full_batch=True))
    s = r.snapshots[-1]
    v = approx_stage_solution(var50, s.x_k, s.y_k, 0.5, s.inner_x)
    assert np.linalg.norm(s.x_next - v) < 1e-2

import math

import numpy as np
import pytest

from infproj.diagnostics import (ConjugatePair, check_lemma1, finite_diff_audit, lipschitz_ratios,
                                 near_stationarity_report, power_family_modulus, rate_slope,
                                 stationarity_report)
from infproj.errors import NonFiniteError
from infproj.mspg import MspgConfig, mspg
from infproj.sparse import SparseVec
from infproj.stspg import StSpgConfig, st_spg
from infproj.synthetic import QuadraticInfProj, make_quadratic_infproj


def test_conjugate_pair_round_trip():
    for p in (2.0, 2.5, 3.0, 4.0):
        a = ConjugatePair.from_uniform_convexity(power_family_modulus(p), p)
        assert a.v == pytest.approx(1 / (p - 1))
        b = ConjugatePair.from_holder(a.L, a.v)
        assert b.p == pytest.approx(p)
    q = ConjugatePair.from_uniform_convexity(1.0, 2.0)
    assert (q.v, q.L) == (1.0, 1.0)
    with pytest.raises(ValueError):
        ConjugatePair.from_uniform_convexity(1.0, 1.5)
    with pytest.raises(ValueError):
        ConjugatePair.from_holder(1.0, 0.0)


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
def test_lemma1_no_violations(p):
    rep = check_lemma1(p, 10_000)
    assert rep.ok, (rep.holder_violations[:3], rep.convexity_violations[:3])
    # the modulus is tight, so the worst sampled ratio sits at 1
    assert rep.worst_holder_ratio == pytest.approx(1.0, abs=1e-12)


def test_lemma1_detects_wrong_modulus():
    rep = check_lemma1(4.0, 10_000)
    wrong = ConjugatePair.from_uniform_convexity(1.0, 4.0)  # modulus 1 is too large for p = 4
    a = np.array([-2.0])
    lhs = abs(np.cbrt(a[0]) - np.cbrt(-a[0]))
    assert lhs > wrong.L * abs(2 * a[0]) ** wrong.v
    assert rep.pair.varrho == 0.25


def test_audit_linear_and_constant():
    w = np.array([1.0, -2.0, 0.5])
    res = finite_diff_audit(lambda x: float(w @ x), lambda x: w, [np.ones(3), np.arange(3.0)])
    assert res.max_rel_error <= 1e-10 and res.checked == 6
    res = finite_diff_audit(lambda x: 4.0, lambda x: np.zeros(3), [np.ones(3)])
    assert res.max_rel_error <= 1e-10


def test_audit_flags_wrong_gradient():
    res = finite_diff_audit(lambda x: float(x @ x), lambda x: x, [np.ones(4)])
    assert res.max_rel_error == pytest.approx(0.5, rel=1e-6)
    assert not res.passed(1e-5)


def test_audit_sparse_support():
    d = 1000
    w = np.zeros(d)
    w[[3, 700]] = (2.0, -1.0)
    grad = lambda x: SparseVec(np.array([3, 700]), np.array([2.0, -1.0]), d)
    res = finite_diff_audit(lambda x: float(w @ x), grad, [np.zeros(d)], extra_random=10)
    assert res.checked <= 12 and res.max_rel_error <= 1e-10


def test_audit_nonfinite():
    with pytest.raises(NonFiniteError, match="point 0"):
        finite_diff_audit(lambda x: x[0] if x[0] > 0 else math.nan, lambda x: np.ones(1), [np.array([1e-9])])
    with pytest.raises(ValueError):
        finite_diff_audit(lambda x: 0.0, lambda x: x, [np.ones(1)], eps=0.0)


def test_rate_slope_examples():
    x = np.arange(1, 101, dtype=float)
    assert rate_slope({"t": x, "y": 1 / x}, "t", "y") == pytest.approx(-1.0, abs=1e-9)
    assert rate_slope({"t": x, "y": np.full(100, 3.0)}, "t", "y") == pytest.approx(0.0, abs=1e-12)
    rows = [{"t": t, "y": t ** 0.5} for t in x]
    assert rate_slope(rows, "t", "y") == pytest.approx(0.5, abs=1e-9)


def test_rate_slope_errors():
    x = np.arange(1, 20, dtype=float)
    with pytest.raises(ValueError):
        rate_slope({"t": x[:9], "y": x[:9]}, "t", "y")
    with pytest.raises(ValueError):
        rate_slope({"t": x, "y": x - 5}, "t", "y")


def test_mspg_squared_stationarity_slope():
    prob = make_quadratic_infproj(seed=0)
    slopes = []
    for seed in range(20):
        res = mspg(prob, MspgConfig(T=400, c=0.25, b=1, seed=seed, log_every=1, x0=2.0 * np.ones(prob.dim_x)))
        best = np.minimum.accumulate([lg.grad_mapping ** 2 for lg in res.logs])
        slopes.append(rate_slope({"t": [lg.t for lg in res.logs], "g": best}, "t", "g"))
    assert np.mean(slopes) <= -0.7


def test_stationarity_at_closed_form_minimizer():
    rng = np.random.default_rng(0)
    A, b = rng.normal(size=(50, 4)), rng.normal(size=50)
    quad = QuadraticInfProj(A, b, np.zeros((50, 4)), np.zeros(50), lam=1.0)
    x = np.linalg.solve(A.T @ A, A.T @ b)
    rep = stationarity_report(x, quad, eps=1e-10)
    assert rep.stationary and rep.grad_norm <= 1e-10
    assert "eps_stationary=true" in rep.as_text()
    assert rep.as_csv().splitlines()[0] == "key,value"


class _FixedGrad:
    def __init__(self, g):
        self.g = np.asarray(g, dtype=float)

    def ystar(self, x):
        return 0.0

    def g_value_grad(self, x):
        return 0.0, self.g

    def ell_jacobian_vec(self, x, y):
        return np.zeros_like(self.g)

    def full_gradient_F(self, x):
        return self.g

    def eval_F(self, x):
        return 0.0


def test_stationarity_threshold_semantics():
    assert stationarity_report(np.zeros(2), _FixedGrad([0.3, 0.4]), eps=1.0).stationary
    assert not stationarity_report(np.zeros(2), _FixedGrad([0.3, 0.4]), eps=0.0).stationary
    assert stationarity_report(np.zeros(2), _FixedGrad([0.0, 0.0]), eps=0.0).stationary


def test_near_stationarity_report():
    prob = make_quadratic_infproj(n=200, d=3, seed=2)
    res = st_spg(prob, StSpgConfig(K=12, gamma=0.5, mu=1.0, full_batch=True, seed=0,
                                   x0=np.ones(prob.dim_x)))
    reps = near_stationarity_report(prob, res.snapshots, 0.5, stages=[2, 12])
    assert [r.k for r in reps] == [2, 12]
    assert reps[-1].grad_norm_at_v < reps[0].grad_norm_at_v
    assert all(math.isfinite(r.dist_to_v) for r in reps)


def test_lipschitz_ratios_bounded_by_constant():
    prob = make_quadratic_infproj(n=300, d=3, seed=1)
    r = lipschitz_ratios(prob, 500)
    assert np.all(np.isfinite(r)) and r.max() > 0

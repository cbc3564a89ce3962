"""Diagnostic suites behind ``infproj check``."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .baselines import chi2_divergence, project_chi2_simplex
from .diagnostics import check_lemma1, finite_diff_audit
from .problem import VarianceRegProblem, logistic_loss, truncated_loss
from .stspg import SubproblemMode, build_subproblem_x, build_subproblem_y, stage_budgets
from .synthetic import make_logistic_data, make_quadratic_infproj

GRAD_TOL = 1e-5


@dataclass
class CheckResult:
    suite: str
    name: str
    operation: str
    passed: bool
    detail: str

    def __post_init__(self):
        self.passed = bool(self.passed)

    def as_dict(self):
        return asdict(self)


def _audit(suite, name, fn, grad, points, **kw):
    res = finite_diff_audit(fn, grad, points, eps=1e-6, **kw)
    return CheckResult(suite, name, "finite_diff_audit", res.passed(GRAD_TOL),
                       f"max_rel_error={res.max_rel_error:.3e} tol={GRAD_TOL:g}")


def gradient_suite(fault=None, n_points=10, seed=0):
    rng = np.random.default_rng(seed)
    data = make_logistic_data(40, 8, seed=seed)
    sign = -1.0 if fault == "wrong-sign-gradient" else 1.0
    pts = [rng.normal(size=8) for _ in range(n_points)]
    out = []
    s0 = data.sample(3)
    out.append(_audit("gradients", "logistic_loss", lambda x: logistic_loss(x, s0)[0],
                      lambda x: logistic_loss(x, s0)[1], pts))
    out.append(_audit("gradients", "truncated_loss", lambda x: truncated_loss(x, s0, 2.0)[0],
                      lambda x: truncated_loss(x, s0, 2.0)[1], pts))
    for kind in ("logistic", "truncated"):
        prob = VarianceRegProblem(data, 0.7, kind, alpha_trunc=3.0 if kind == "truncated" else None)
        out.append(_audit("gradients", f"grad_F[{kind}]", prob.eval_F,
                          lambda x, p=prob: sign * p.full_gradient_F(x), pts))
        out.append(_audit("gradients", f"g[{kind}]", lambda x, p=prob: p.g_value_grad(x)[0],
                          lambda x, p=prob: p.g_value_grad(x)[1], pts))
        out.append(_audit("gradients", f"ell[{kind}]", prob.ell_value,
                          lambda x, p=prob: p.ell_jacobian_vec(x, 1.0), pts))
        xk, yk = rng.normal(size=8), 0.8
        sub = build_subproblem_x(prob, xk, yk, SubproblemMode.DC_LINEARIZED, full_batch=True)
        out.append(_audit("gradients", f"subproblem_x[{kind}]", sub.value, sub.grad, pts))
        suby = build_subproblem_y(prob, xk, full_batch=True)
        ypts = [np.array([abs(v) + 0.1]) for v in rng.normal(size=n_points)]
        out.append(_audit("gradients", f"subproblem_y[{kind}]", suby.value, suby.grad, ypts))
    q = make_quadratic_infproj(n=200, d=4, seed=seed)
    qpts = [rng.normal(size=4) * 0.3 + q.stationary_point() for _ in range(n_points)]
    out.append(_audit("gradients", "grad_F[quadratic]", q.eval_F, lambda x: sign * q.full_gradient_F(x), qpts))
    return out


def lemma1_suite(sample_count=10_000):
    out = []
    for p in (2.0, 3.0, 4.0):
        rep = check_lemma1(p, sample_count)
        out.append(CheckResult("lemma1", f"p={p:g}", "check_lemma1", rep.ok,
                               f"holder_violations={len(rep.holder_violations)} "
                               f"convexity_violations={len(rep.convexity_violations)} "
                               f"worst_ratio={rep.worst_holder_ratio:.6f}"))
    return out


def _grid_projection(q, rho, step=1e-3, curve_points=100_000):
    """Nearest feasible point among a simplex grid plus dense samples of the set's boundary curves.

    The grid alone lands O(sqrt(step)) away along the curved ball boundary.
    """
    a = np.arange(0.0, 1.0 + step / 2, step)
    P1, P2 = np.meshgrid(a, a)
    grid = np.stack([P1.ravel(), P2.ravel(), 1.0 - P1.ravel() - P2.ravel()], axis=1)
    u = np.full(3, 1 / 3)
    e1, e2 = np.array([1.0, -1.0, 0.0]) / math.sqrt(2), np.array([1.0, 1.0, -2.0]) / math.sqrt(6)
    phi = np.linspace(0, 2 * math.pi, curve_points, endpoint=False)
    R = math.sqrt(2 * rho / 3)
    arc = u + R * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
    t = np.linspace(0, 1, curve_points)[:, None]
    edges = [np.hstack([0 * t, t, 1 - t]), np.hstack([t, 0 * t, 1 - t]), np.hstack([t, 1 - t, 0 * t])]
    P = np.concatenate([grid, arc] + edges)
    P = P[np.all(P >= -1e-15, axis=1)]
    P = P[np.sum((P - u) ** 2, axis=1) <= R * R * (1 + 1e-12)]
    return P[np.argmin(np.sum((P - q) ** 2, axis=1))]


def projection_suite(trials=1000, seed=0):
    rng = np.random.default_rng(seed)
    worst_feas = worst_idem = worst_exp = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 40))
        rho = 10 ** rng.uniform(-3, 1)
        q = rng.normal(size=n) * rng.uniform(0.01, 2.0)
        q2 = rng.normal(size=n) * rng.uniform(0.01, 2.0)
        p = project_chi2_simplex(q, rho).p
        p2 = project_chi2_simplex(q2, rho).p
        worst_feas = max(worst_feas, abs(p.sum() - 1), -p.min(), chi2_divergence(p) - rho)
        worst_idem = max(worst_idem, float(np.abs(project_chi2_simplex(p, rho).p - p).max()))
        worst_exp = max(worst_exp, float(np.linalg.norm(p - p2) - np.linalg.norm(q - q2)))
    out = [CheckResult("projection", "feasibility", "project_chi2_simplex", worst_feas <= 1e-8,
                       f"max_violation={worst_feas:.3e}"),
           CheckResult("projection", "idempotence", "project_chi2_simplex", worst_idem <= 1e-12,
                       f"max_change={worst_idem:.3e}"),
           CheckResult("projection", "nonexpansive", "project_chi2_simplex", worst_exp <= 1e-12,
                       f"max_excess={worst_exp:.3e}")]
    worst_grid = 0.0
    for q, rho in (((0.9, 0.05, 0.05), 0.05), ((1.0, 0.0, -1.0), 0.1), ((0.2, 0.5, 2.0), 0.3),
                   ((-0.54, 0.36, 1.3), 0.29), ((-0.16, 0.54, 0.21), 0.042)):
        q = np.asarray(q)
        worst_grid = max(worst_grid, float(np.linalg.norm(project_chi2_simplex(q, rho).p - _grid_projection(q, rho))))
    out.append(CheckResult("projection", "grid_oracle", "project_chi2_simplex", worst_grid <= 2e-3,
                           f"max_distance={worst_grid:.3e}"))
    return out


def invariant_suite(trials=200, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        data = make_logistic_data(int(rng.integers(2, 30)), 5, seed=int(rng.integers(1 << 30)))
        prob = VarianceRegProblem(data, float(10 ** rng.uniform(-2, 1)))
        x = rng.normal(size=5) * 2
        a, b = prob.eval_F(x), prob.eval_F_expanded(x)
        worst = max(worst, abs(a - b) / max(abs(a), 1e-300))
    out = [CheckResult("invariants", "F_equivalence", "eval_F", worst <= 1e-10, f"max_rel_diff={worst:.3e}")]
    prob = VarianceRegProblem(make_logistic_data(10, 3), 1.0)
    ys = [prob.prox_h(v, e) for v in rng.normal(size=200) * 10 for e in (1e-3, 1.0, 1e3)]
    out.append(CheckResult("invariants", "prox_feasible", "prox_h", min(ys) >= 0.0, f"min_y={min(ys):.3e}"))
    sched_ok = stage_budgets(4, 0.5, 1.0) == (9, 5) and all(
        stage_budgets(k, g, m) == (math.ceil(round(k / g, 9)) + 1, math.ceil(round(k / m, 9)) + 1)
        for k in range(1, 50) for g in (0.1, 0.3, 1.0) for m in (0.2, 2.0))
    out.append(CheckResult("invariants", "stage_schedule", "stage_budgets", sched_ok, "growing schedule"))
    return out


SUITES = {
    "gradients": gradient_suite,
    "lemma1": lemma1_suite,
    "projection": projection_suite,
    "invariants": invariant_suite,
}


def run_suites(names, fault=None) -> list[CheckResult]:
    if "all" in names:
        names = list(SUITES)
    out = []
    for name in dict.fromkeys(names):
        fn = SUITES[name]
        out.extend(fn(fault=fault) if name == "gradients" else fn())
    return out

"""Comparison baselines: mini-batch SGD on the empirical risk and a chi-square min-max solver.

The min-max baseline solves

    min_theta max_{P in Delta_n, D(P || uniform) <= rho} sum_i P_i l_i(theta),
    D(P || uniform) = (1/2n) sum_i (n P_i - 1)^2,

by alternating an importance-weighted stochastic step on theta with a Euclidean
ascent step on P followed by projection onto the uncertainty set. The dual step
touches all n weights, which is what makes its per-iteration cost O(n).
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import DivergenceError, NonFiniteError
from .problem import LossKind, VarianceRegProblem, _as_model


def chi2_divergence(p) -> float:
    p = np.asarray(p, dtype=np.float64)
    n = p.size
    return 0.5 * float(np.sum((n * p - 1.0) ** 2)) / n


@dataclass
class DualWeights:
    p: np.ndarray
    rho: float

    def divergence(self) -> float:
        return chi2_divergence(self.p)

    def check(self, tol_sum=1e-10, tol_div=1e-8) -> None:
        if abs(float(self.p.sum()) - 1.0) > tol_sum or float(self.p.min()) < 0.0:
            raise AssertionError("dual weights left the simplex")
        if self.divergence() > self.rho + tol_div:
            raise AssertionError(f"dual weights left the chi-square ball: {self.divergence()} > {self.rho}")


def project_simplex(q) -> tuple[np.ndarray, float]:
    """Euclidean projection onto the probability simplex; returns (p, threshold)."""
    q = np.asarray(q, dtype=np.float64)
    s = np.sort(q)[::-1]
    css = np.cumsum(s) - 1.0
    k = np.arange(1, q.size + 1)
    rho = int(np.nonzero(s - css / k > 0)[0][-1])
    theta = css[rho] / (rho + 1)
    return np.maximum(q - theta, 0.0), float(theta)


def _in_set(q, r2, tol=0.0) -> bool:
    return (abs(float(q.sum()) - 1.0) <= 1e-12 and float(q.min()) >= 0.0
            and float(np.sum((q - 1.0 / q.size) ** 2)) <= r2 + tol)


def project_chi2_simplex(q, rho: float) -> DualWeights:
    """Euclidean projection of ``q`` onto {P in simplex : D(P || uniform) <= rho}.

    Optimality conditions give P = (q - theta)_+ / S(theta) with S(theta) = sum (q - theta)_+,
    theta at most the simplex threshold. With the support fixed to the top-k entries,
    the ball condition |P|^2 = 2 rho / n + 1 / n is a quadratic in theta, so the solve
    walks the sorted breakpoints to the right support and takes the root there.
    """
    q = np.asarray(q, dtype=np.float64).ravel()
    if q.size == 0:
        raise ValueError("q must be non-empty")
    if not np.all(np.isfinite(q)):
        raise NonFiniteError("project_chi2_simplex received a non-finite entry")
    if not rho > 0:
        raise ValueError("rho must be positive")
    n = q.size
    r2 = 2.0 * rho / n
    if _in_set(q, r2):
        return DualWeights(q.copy(), rho)
    p0, theta0 = project_simplex(q)
    if float(np.sum((p0 - 1.0 / n) ** 2)) <= r2:
        return DualWeights(p0, rho)

    # the projection is shift invariant; centering keeps the quadratic well conditioned
    shift = float(q.mean())
    q = q - shift
    theta0 -= shift
    c = r2 + 1.0 / n
    s = np.sort(q)[::-1]
    Q1 = np.cumsum(s)
    Q2 = np.cumsum(s * s)

    def ratio(k, th):  # |(q - th)_+|^2 / S^2 with support = top k
        s1 = Q1[k - 1] - k * th
        s2 = Q2[k - 1] - 2.0 * th * Q1[k - 1] + k * th * th
        return s2 / (s1 * s1)

    k0 = int(np.count_nonzero(p0))
    # ratio at the lower breakpoint s[k] of each support size k; it decreases in k
    ks = np.arange(k0, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        r_low = ratio(ks, s[ks]) if ks.size else np.empty(0)
    above = np.flatnonzero(~(r_low <= c))
    first_ok = int(above[-1]) + 1 if above.size else 0
    k = k0 + first_ok
    if k == n:  # full support: P = 1/n + q sqrt(r2) / |q| in closed form
        p = 1.0 / n + q * (math.sqrt(r2) / math.sqrt(Q2[-1]))
        return DualWeights(p / p.sum(), rho)
    hi = theta0 if k == k0 else s[k - 1]
    lo = s[k]
    # quadratic (k - c k^2) th^2 + 2 Q1 (c k - 1) th + (Q2 - c Q1^2) = 0 on [lo, hi]
    a2 = k - c * k * k
    a1 = 2.0 * Q1[k - 1] * (c * k - 1.0)
    a0 = Q2[k - 1] - c * Q1[k - 1] ** 2
    theta = None
    if abs(a2) > 1e-300:
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc >= 0:
            sq = math.sqrt(disc)
            for root in ((-a1 - sq) / (2 * a2), (-a1 + sq) / (2 * a2)):
                if lo - 1e-12 * (1 + abs(lo)) <= root <= hi + 1e-12 * (1 + abs(hi)):
                    theta = root
                    break
    if theta is None:  # degenerate quadratic; the ratio is monotone in theta on [lo, hi]
        a, b = lo, hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            if ratio(k, mid) > c:
                b = mid
            else:
                a = mid
        theta = 0.5 * (a + b)
    p = np.maximum(q - theta, 0.0)
    p /= p.sum()
    return DualWeights(p, rho)


# --- solvers --------------------------------------------------------------------

@dataclass
class SgdConfig:
    T: int
    eta: float
    batch_size: int = 1
    seed: int = 0
    log_every: int = 100
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.T < 1 or self.batch_size < 1 or not self.eta > 0:
            raise ValueError("SGD needs T >= 1, batch_size >= 1 and eta > 0")


@dataclass
class BmdConfig:
    T: int
    eta_theta: float
    eta_p: float
    rho: float
    batch_size: int = 1
    full_dual: bool = False
    seed: int = 0
    log_every: int = 100
    x0: Optional[np.ndarray] = None
    check_every: int = 0

    def __post_init__(self):
        if self.T < 1 or self.batch_size < 1:
            raise ValueError("BMD needs T >= 1 and batch_size >= 1")
        if not self.eta_theta > 0 or not self.eta_p >= 0 or not self.rho > 0:
            raise ValueError("BMD needs eta_theta > 0, eta_p >= 0 and rho > 0")


@dataclass
class BaselineResult:
    x: np.ndarray
    p: Optional[DualWeights] = None
    dual_seconds: float = 0.0
    iterations: int = 0


def _kernel_args(problem: VarianceRegProblem):
    d = problem.data
    return d.indptr, d.indices, d.data, d.labels, problem.loss_kind.code, problem.alpha_trunc


def sgd_erm(problem, config: SgdConfig, monitor=None) -> BaselineResult:
    """Constant-step mini-batch SGD on the mean loss (the variance weight is not used).

    Any other oracle is treated as ERM on its g-part, stepping along its sampled g-gradient.
    """
    native = isinstance(problem, VarianceRegProblem)
    if native:
        indptr, indices, data, labels, kind, alpha = _kernel_args(problem)
    rng = np.random.default_rng(config.seed)
    x = np.zeros(problem.dim_x) if config.x0 is None else _as_model(config.x0, problem.dim_x).copy()
    n, m = problem.n, config.batch_size
    w = np.full(m, 1.0 / m)
    g = np.empty(problem.dim_x)
    for t in range(1, config.T + 1):
        idx = rng.integers(0, n, m)
        if native:
            g.fill(0.0)
            kernels.accumulate_grad(indptr, indices, data, labels, idx, x, kind, alpha, 1.0, 0.0, w, g)
        else:
            g = problem.g_value_grad(x, idx)[1]
        x -= config.eta * g
        if not np.all(np.isfinite(x)):
            raise DivergenceError("SGD iterate became non-finite", iteration=t)
        if monitor is not None and (monitor.due(t) or t == config.T):
            monitor.record(t, x)
    return BaselineResult(x, iterations=config.T)


def bmd_minmax(problem: VarianceRegProblem, config: BmdConfig, monitor=None) -> BaselineResult:
    """Stochastic primal-dual solver for the chi-square min-max formulation.

    theta-step: theta -= eta_theta * sum_{i in batch} (n P_i / m) grad l_i(theta)
    P-step:     P = project(P + eta_p * l_hat), l_hat the unbiased (n/m)-scaled loss
                estimate on the batch, or the full loss vector when ``full_dual``.
    """
    if problem.loss_kind is not LossKind.LOGISTIC:
        warnings.warn("the min-max baseline assumes a convex loss", RuntimeWarning, stacklevel=2)
    indptr, indices, data, labels, kind, alpha = _kernel_args(problem)
    rng = np.random.default_rng(config.seed)
    x = np.zeros(problem.dim_x) if config.x0 is None else _as_model(config.x0, problem.dim_x).copy()
    n, m = problem.n, config.batch_size
    dual = DualWeights(np.full(n, 1.0 / n), config.rho)
    all_rows = np.arange(n, dtype=np.int64)
    g = np.empty(problem.dim_x)
    est = np.zeros(n)
    dual_seconds = 0.0
    for t in range(1, config.T + 1):
        idx = rng.integers(0, n, m)
        losses = kernels.batch_losses(indptr, indices, data, labels, idx, x, kind, alpha)
        g.fill(0.0)
        w = dual.p[idx] * (n / m)
        kernels.accumulate_grad(indptr, indices, data, labels, idx, x, kind, alpha, 1.0, 0.0, w, g)

        c0 = time.process_time()
        if config.full_dual:
            est = kernels.batch_losses(indptr, indices, data, labels, all_rows, x, kind, alpha)
        else:
            est.fill(0.0)
            np.add.at(est, idx, (n / m) * losses)
        if config.eta_p > 0:
            dual = project_chi2_simplex(dual.p + config.eta_p * est, config.rho)
        dual_seconds += time.process_time() - c0

        x -= config.eta_theta * g
        if not np.all(np.isfinite(x)):
            raise DivergenceError("BMD iterate became non-finite", iteration=t)
        if config.check_every and t % config.check_every == 0:
            dual.check()
        if monitor is not None and (monitor.due(t) or t == config.T):
            monitor.record(t, x, extras={"dual_seconds": dual_seconds,
                                         "dual_divergence": dual.divergence()})
    return BaselineResult(x, dual, dual_seconds, config.T)

"""Numeric checks of the structural claims the solvers rely on.

* conjugate duality between uniform convexity of h and Hölder smoothness of h*,
* central finite-difference audits of analytic gradients,
* log-log rate slopes of traces,
* stationarity reports for candidate points.

Every threshold used here is a contract of this package, not a theoretical constant.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import NonFiniteError
from .sparse import SparseVec


# --- conjugate pairs -------------------------------------------------------------

@dataclass(frozen=True)
class ConjugatePair:
    """Uniform convexity (varrho, p) of h paired with Hölder smoothness (L, v) of grad h*."""

    p: float
    varrho: float
    v: float
    L: float

    @classmethod
    def from_uniform_convexity(cls, varrho: float, p: float) -> "ConjugatePair":
        if not p >= 2 or not varrho > 0:
            raise ValueError("need p >= 2 and varrho > 0")
        return cls(p, varrho, 1.0 / (p - 1.0), (1.0 / varrho) ** (1.0 / (p - 1.0)))

    @classmethod
    def from_holder(cls, L: float, v: float) -> "ConjugatePair":
        if not 0 < v <= 1 or not L > 0:
            raise ValueError("need 0 < v <= 1 and L > 0")
        return cls(1.0 + 1.0 / v, (2 * v / (1 + v)) * (1.0 / L) ** (1.0 / v), v, L)


def power_family_modulus(p: float) -> float:
    """Uniform-convexity modulus of h(y) = |y|^p / p in the scalar case.

    (|a|^{p-2} a - |b|^{p-2} b)(a - b) >= 2^{2-p} |a - b|^p, tight at b = -a.
    """
    return 2.0 ** (2.0 - p)


@dataclass
class Lemma1Report:
    p: float
    pair: ConjugatePair
    samples: int
    holder_violations: list = field(default_factory=list)
    convexity_violations: list = field(default_factory=list)
    worst_holder_ratio: float = 0.0
    worst_convexity_ratio: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.holder_violations and not self.convexity_violations


def check_lemma1(p: float, sample_count: int = 10_000, seed: int = 0, bound: float = 10.0,
                 slack: float = 1e-9) -> Lemma1Report:
    """Check both sides of the duality for h(y) = |y|^p / p on random scalar pairs in [-bound, bound].

    Dual side:   |grad h*(s1) - grad h*(s2)| <= L |s1 - s2|^v,  grad h*(s) = sign(s) |s|^{1/(p-1)}.
    Primal side: varrho |y1 - y2|^p <= (grad h(y1) - grad h(y2)) (y1 - y2).
    """
    pair = ConjugatePair.from_uniform_convexity(power_family_modulus(p), p)
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(-bound, bound, size=(2, sample_count))
    a[:3], b[:3] = (1.0, 0.0, -2.0), (1.0, 0.0, 2.0)  # equal pairs and the tight antipodal pair
    q_exp = 1.0 / (p - 1.0)

    def dh_conj(s):
        return np.sign(s) * np.abs(s) ** q_exp

    def dh(y):
        return np.sign(y) * np.abs(y) ** (p - 1.0)

    rep = Lemma1Report(p, pair, sample_count)
    lhs = np.abs(dh_conj(a) - dh_conj(b))
    rhs = pair.L * np.abs(a - b) ** pair.v
    bad = np.flatnonzero(lhs > rhs + slack)
    rep.holder_violations = [(float(a[i]), float(b[i]), float(lhs[i]), float(rhs[i])) for i in bad]
    nz = rhs > 0
    rep.worst_holder_ratio = float(np.max(lhs[nz] / rhs[nz])) if nz.any() else 0.0

    lower = pair.varrho * np.abs(a - b) ** p
    inner = (dh(a) - dh(b)) * (a - b)
    # relative slack: both sides reach 10^4 for p = 4 on [-10, 10]
    bad = np.flatnonzero(lower > inner + slack * (1.0 + np.abs(inner)))
    rep.convexity_violations = [(float(a[i]), float(b[i]), float(lower[i]), float(inner[i])) for i in bad]
    nz = inner > 0
    rep.worst_convexity_ratio = float(np.max(lower[nz] / inner[nz])) if nz.any() else 0.0
    return rep


# --- finite differences ------------------------------------------------------------

@dataclass
class AuditResult:
    max_rel_error: float
    worst_point: int
    worst_coord: int
    checked: int

    def passed(self, tol: float) -> bool:
        return self.max_rel_error <= tol


def _dense(g, d=None) -> np.ndarray:
    if isinstance(g, SparseVec):
        return g.to_dense()
    return np.atleast_1d(np.asarray(g, dtype=np.float64))


def finite_diff_audit(fn: Callable, grad_fn: Callable, points: Iterable, eps: float = 1e-6,
                      coords: Optional[Callable] = None, extra_random: int = 10, seed: int = 0,
                      floor: float = 1.0) -> AuditResult:
    """Worst relative error between ``grad_fn`` and central differences of ``fn``.

    The error at a coordinate is |fd - g| / max(|fd|, |g|, floor); ``floor`` keeps
    tiny components from inflating the ratio. When the analytic gradient is a
    SparseVec, or ``coords`` returns a support, only those coordinates plus
    ``extra_random`` random others are differenced.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    rng = np.random.default_rng(seed)
    worst = AuditResult(0.0, -1, -1, 0)
    for pi, x in enumerate(points):
        x = np.array(_dense(x), dtype=np.float64)
        g_raw = grad_fn(x)
        g = _dense(g_raw)
        if g.shape != x.shape:
            raise ValueError(f"gradient has shape {g.shape}, point has {x.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"finite_diff_audit: non-finite gradient at point {pi}")
        if coords is not None:
            support = np.asarray(coords(x), dtype=np.int64)
        elif isinstance(g_raw, SparseVec):
            support = g_raw.indices
        else:
            support = None
        if support is not None:
            extra = rng.integers(0, x.size, size=min(extra_random, x.size))
            idx = np.unique(np.concatenate([support, extra]))
        else:
            idx = np.arange(x.size)
        for j in idx:
            e = np.zeros_like(x)
            e[j] = eps
            fp, fm = float(fn(x + e)), float(fn(x - e))
            if not (math.isfinite(fp) and math.isfinite(fm)):
                raise NonFiniteError(f"finite_diff_audit: non-finite value near point {pi}, coordinate {j}")
            fd = (fp - fm) / (2 * eps)
            err = abs(fd - g[j]) / max(abs(fd), abs(g[j]), floor)
            worst.checked += 1
            if err > worst.max_rel_error:
                worst = AuditResult(err, pi, int(j), worst.checked)
    return worst


# --- rate slopes -------------------------------------------------------------------

def rate_slope(trace, x_col: str = "stage_or_iter", y_col: str = "grad_norm", trailing: float = 0.5) -> float:
    """Least-squares slope of log y against log x over the trailing half of ``trace``.

    ``trace`` may be a list of TraceRecords, a list of dicts or a mapping of columns.
    """
    xs, ys = _columns(trace, x_col, y_col)
    if xs.size < 10:
        raise ValueError(f"rate_slope needs at least 10 points, got {xs.size}")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("rate_slope needs positive values in both columns")
    start = int(math.floor(xs.size * (1.0 - trailing)))
    lx, ly = np.log(xs[start:]), np.log(ys[start:])
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def _columns(trace, x_col, y_col):
    if isinstance(trace, dict):
        return np.asarray(trace[x_col], dtype=np.float64), np.asarray(trace[y_col], dtype=np.float64)

    def get(r, c):
        if isinstance(r, dict):
            return r[c]
        if hasattr(r, c):
            return getattr(r, c)
        return r.extras[c]

    rows = list(trace)
    return (np.array([get(r, x_col) for r in rows], dtype=np.float64),
            np.array([get(r, y_col) for r in rows], dtype=np.float64))


# --- stationarity ------------------------------------------------------------------

@dataclass
class StationarityReport:
    grad_norm: float
    y_star: float
    eps: float
    stationary: bool
    terms: dict

    def as_text(self) -> str:
        lines = [f"grad_norm={self.grad_norm!r}", f"y_star={self.y_star!r}", f"eps={self.eps!r}",
                 f"eps_stationary={str(self.stationary).lower()}"]
        lines += [f"term.{k}={v!r}" for k, v in sorted(self.terms.items())]
        return "\n".join(lines)

    def as_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in (("grad_norm", self.grad_norm), ("y_star", self.y_star), ("eps", self.eps),
                     ("eps_stationary", int(self.stationary))):
            w.writerow([k, repr(v)])
        for k, v in sorted(self.terms.items()):
            w.writerow([f"term.{k}", repr(v)])
        return buf.getvalue()


def stationarity_report(x, problem, eps: float = 1e-3) -> StationarityReport:
    """|grad F(x)| with y*(x) and the split grad g - y* grad ell; eps-stationary iff |grad F| <= eps."""
    x = np.asarray(x, dtype=np.float64)
    y = float(problem.ystar(x))
    gg = problem.g_value_grad(x)[1]
    gl = problem.ell_jacobian_vec(x, y)
    gF = problem.full_gradient_F(x)
    norm = float(np.linalg.norm(gF))
    terms = {"grad_g_norm": float(np.linalg.norm(gg)), "ystar_jac_ell_norm": float(np.linalg.norm(gl)),
             "F": float(problem.eval_F(x))}
    return StationarityReport(norm, y, float(eps), norm <= eps, terms)


@dataclass
class NearStationarityReport:
    k: int
    grad_norm_at_v: float
    dist_to_v: float


def near_stationarity_report(problem, snapshots: Sequence, gamma: float, factor: int = 50,
                             stages: Optional[Sequence[int]] = None) -> list[NearStationarityReport]:
    """Pair |grad F(v_k)| with |x_k - v_k| where v_k approximates the stage-k proximal point.

    v_k is the SPG solution of the stage-k x-subproblem with ``factor`` times its budget.
    """
    from .stspg import approx_stage_solution

    out = []
    for snap in snapshots:
        if stages is not None and snap.k not in stages:
            continue
        v = approx_stage_solution(problem, snap.x_k, snap.y_k, gamma, snap.inner_x, factor)
        out.append(NearStationarityReport(snap.k, float(np.linalg.norm(problem.full_gradient_F(v))),
                                          float(np.linalg.norm(snap.x_k - v))))
    return out


def lipschitz_ratios(problem, sample_count: int, scale: float = 1.0, seed: int = 0) -> np.ndarray:
    """Sampled |grad f0(w) - grad f0(w')| / |w - w'| over random pairs of joint points."""
    rng = np.random.default_rng(seed)
    lo, hi = problem.y_bounds
    ratios = np.empty(sample_count)
    for i in range(sample_count):
        xs = scale * rng.normal(size=(2, problem.dim_x))
        ys = rng.uniform(max(lo, -scale * 10), min(hi, scale * 10), size=2)
        g = [np.concatenate([gx, [gy]]) for gx, gy in
             (problem.f0_partial_grads(xs[j], ys[j]) for j in range(2))]
        dw = np.linalg.norm(np.concatenate([xs[0] - xs[1], [ys[0] - ys[1]]]))
        ratios[i] = np.linalg.norm(g[0] - g[1]) / dw
    return ratios

"""Stagewise SPG (St-SPG) for DC and bi-convex inf-projection problems.

Stage k solves two strongly convex subproblems approximately with SPG:

    x_{k+1} ~ argmin_x f_x^k(x) + gamma/2 |x - x_k|^2
    y_{k+1} ~ argmin_y h(y) - y ell(x_{k+1}) + mu/2 |y - y_k|^2

where f_x^k linearizes ell at x_k (dom h >= 0, DC case) or keeps ell (dom h <= 0,
bi-convex case). The reported point is x_{tau+1} for tau drawn with P(tau = k)
proportional to k^alpha; the last iterate is returned as well.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DivergenceError, ModeMismatchError, NonFiniteError
from .problem import DomainY, InfProjOracle
from .spg import Box, SpgConfig, StepRule, spg
from .trace import Stopwatch


class SubproblemMode(enum.Enum):
    DC_LINEARIZED = "dc"
    BICONVEX = "biconvex"


def mode_for(problem: InfProjOracle) -> SubproblemMode:
    if problem.domain_y is DomainY.NONNEG:
        return SubproblemMode.DC_LINEARIZED
    if problem.domain_y is DomainY.NONPOS:
        return SubproblemMode.BICONVEX
    raise ModeMismatchError("stagewise subproblems need a one-sided y-domain (nonneg or nonpos)")


class _Draws:
    """Per-iteration index batches for the two independent sample streams."""

    def __init__(self, first, second=None):
        self.first = first
        self.second = second

    def __getitem__(self, t):
        if self.second is None:
            return self.first[t]
        return self.first[t], self.second[t]


class SubproblemX:
    """Oracle for f_x^k; the linearization point x_k and y_k are frozen for the stage."""

    def __init__(self, problem, x_k, y_k, mode: SubproblemMode, batch_size=1, full_batch=False):
        self.problem = problem
        self.x_k = np.array(x_k, dtype=np.float64)
        self.y_k = float(y_k)
        self.mode = mode
        self.batch_size = int(batch_size)
        self.full_batch = bool(full_batch)
        self.dim = problem.dim_x
        self._ell_k = None

    def draw(self, rng, T):
        if self.full_batch:
            return None
        shape = (T, self.batch_size)
        return _Draws(rng.integers(0, self.problem.n, size=shape), rng.integers(0, self.problem.n, size=shape))

    def grad(self, z, sample=None):
        idx_g, idx_l = (None, None) if sample is None else sample
        g = self.problem.g_value_grad(z, idx_g)[1]
        point = self.x_k if self.mode is SubproblemMode.DC_LINEARIZED else z
        return g - self.problem.ell_jacobian_vec(point, self.y_k, idx_l)

    def value(self, z) -> float:
        g = self.problem.g_value_grad(z)[0]
        if self.mode is SubproblemMode.BICONVEX:
            return g - self.y_k * self.problem.ell_value(z)
        if self._ell_k is None:
            self._ell_k = (self.problem.ell_value(self.x_k), self.problem.ell_jacobian_vec(self.x_k, 1.0))
        ell0, jac = self._ell_k
        return g - self.y_k * (ell0 + float(np.dot(jac, np.asarray(z) - self.x_k)))

    def fused_spg(self, z1, gamma, etas, draws, lower, upper):
        fused = getattr(self.problem, "fused_spg_x", None)
        if fused is None or self.mode is not SubproblemMode.DC_LINEARIZED or not np.isscalar(lower):
            return None
        if draws is None:
            rows_g = rows_l = np.arange(self.problem.n, dtype=np.int64)[None, :]
        else:
            rows_g, rows_l = draws.first, draws.second
        return fused(z1, self.x_k, self.y_k, gamma, etas, rows_g, rows_l, lower, upper)


class SubproblemY:
    """Oracle for f_y^k(y) = h(y) - y ell(x_{k+1}) on scalar y (as a length-1 array)."""

    def __init__(self, problem, x_next, batch_size=1, full_batch=False):
        self.problem = problem
        self.x_next = np.array(x_next, dtype=np.float64)
        self.batch_size = int(batch_size)
        self.full_batch = bool(full_batch)
        self.dim = 1

    def draw(self, rng, T):
        if self.full_batch:
            return None
        return rng.integers(0, self.problem.n, size=(T, self.batch_size))

    def grad(self, z, sample=None):
        y = float(np.asarray(z).ravel()[0])
        return np.array([self.problem.h_value_grad(y)[1] - self.problem.ell_value(self.x_next, sample)])

    def value(self, z) -> float:
        y = float(np.asarray(z).ravel()[0])
        return self.problem.h_value_grad(y)[0] - y * self.problem.ell_value(self.x_next)

    def fused_spg(self, z1, gamma, etas, draws, lower, upper):
        fused = getattr(self.problem, "fused_spg_y", None)
        if fused is None:
            return None
        rows = np.arange(self.problem.n, dtype=np.int64)[None, :] if draws is None else draws
        return fused(self.x_next, float(z1[0]), gamma, etas, rows, lower, upper)


def build_subproblem_x(problem, x_k, y_k, mode: SubproblemMode | str | None = None, batch_size=1,
                       full_batch=False) -> SubproblemX:
    expected = mode_for(problem)
    mode = expected if mode is None else SubproblemMode(mode)
    if mode is not expected:
        raise ModeMismatchError(f"{mode.value} subproblem requires y-domain "
                                f"{'nonneg' if mode is SubproblemMode.DC_LINEARIZED else 'nonpos'}, "
                                f"problem has {problem.domain_y.value}")
    return SubproblemX(problem, x_k, y_k, mode, batch_size, full_batch)


def build_subproblem_y(problem, x_next, batch_size=1, full_batch=False) -> SubproblemY:
    return SubproblemY(problem, x_next, batch_size, full_batch)


# --- schedules and output sampling ------------------------------------------

def _ceil(q: float) -> int:
    # k / gamma can land a hair above an integer (3 / 0.1 = 30.000000000000004)
    r = round(q)
    if abs(q - r) <= 1e-9 * max(1.0, abs(q)):
        return int(r)
    return math.ceil(q)


def stage_budgets(k: int, gamma: float, mu: float, schedule: Union[str, int] = "growing") -> tuple[int, int]:
    """Inner iteration budgets (T_k^x, T_k^y) = (ceil(k/gamma) + 1, ceil(k/mu) + 1) or a fixed T."""
    if schedule == "growing":
        return _ceil(k / gamma) + 1, _ceil(k / mu) + 1
    T = int(schedule)
    if T < 1:
        raise ValueError("fixed stage budget must be >= 1")
    return T, T


def stage_probabilities(K: int, alpha: float) -> np.ndarray:
    """P(tau = k) = k^alpha / sum_s s^alpha for k = 1..K."""
    w = np.arange(1, K + 1, dtype=np.float64) ** alpha
    return w / w.sum()


def sample_stage(rng, K: int, alpha: float, size=None):
    return rng.choice(np.arange(1, K + 1), size=size, p=stage_probabilities(K, alpha))


@dataclass
class StSpgConfig:
    K: int
    gamma: float
    mu: float
    alpha_samp: float = 1.0
    schedule: Union[str, int] = "growing"
    mode_x: StepRule = StepRule.SMOOTH
    mode_y: StepRule = StepRule.SMOOTH
    batch_size: int = 1
    full_batch: bool = False
    seed: int = 0
    log_every: int = 1
    snapshot_metrics: bool = True
    dense_trace: bool = False
    x0: Optional[np.ndarray] = None
    y0: Optional[float] = None

    def __post_init__(self):
        self.mode_x = StepRule(self.mode_x)
        self.mode_y = StepRule(self.mode_y)
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")
        if not self.gamma > 0 or not self.mu > 0:
            raise ValueError("gamma and mu must be positive")
        if not self.alpha_samp >= 1:
            raise ValueError("alpha_samp must be >= 1")
        if self.schedule != "growing" and int(self.schedule) < 1:
            raise ValueError("schedule must be 'growing' or a positive integer")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class StageSnapshot:
    k: int
    x_k: np.ndarray
    y_k: float
    x_next: np.ndarray
    y_next: float
    cpu_time: float
    F_next: float = math.nan
    grad_norm_next: float = math.nan
    joint_next: float = math.nan
    inner_x: int = 0
    inner_y: int = 0
    x_cpu: float = 0.0
    y_cpu: float = 0.0


@dataclass
class StSpgResult:
    x_tau: np.ndarray  # x_{tau+1}
    tau: int
    x_tau_start: np.ndarray  # x_tau
    x_last: np.ndarray
    y_last: float
    snapshots: list[StageSnapshot]
    dense_trace: list = field(default_factory=list)


def st_spg(problem: InfProjOracle, config: StSpgConfig, monitor=None) -> StSpgResult:
    mode = mode_for(problem)
    stage_seq, tau_seq = np.random.SeedSequence(config.seed).spawn(2)
    rng = np.random.default_rng(stage_seq)
    clock = monitor.clock if monitor is not None else Stopwatch()

    x = np.zeros(problem.dim_x) if config.x0 is None else np.array(config.x0, dtype=np.float64)
    x = problem.project_x(x)
    lo, hi = problem.y_bounds
    if config.y0 is None:
        with clock.paused():
            y = float(problem.ystar(x))
    else:
        y = min(max(float(config.y0), lo), hi)
    x_box = Box()
    y_box = Box(lo, hi)
    snapshots: list[StageSnapshot] = []
    dense: list = []

    for k in range(1, config.K + 1):
        Tx, Ty = stage_budgets(k, config.gamma, config.mu, config.schedule)
        ox = SubproblemX(problem, x, y, mode, config.batch_size, config.full_batch)
        cb = None
        if config.dense_trace:
            def cb(t, z, _k=k, _ox=ox):
                with clock.paused():
                    dense.append((_k, t, _ox.value(z) + 0.5 * config.gamma * float(np.sum((z - _ox.x_k) ** 2))))
        c0 = clock.cpu()
        x_next = spg(ox, x, SpgConfig(Tx, config.gamma, config.mode_x), domain=x_box, rng=rng, callback=cb)
        x_next = problem.project_x(x_next)
        c1 = clock.cpu()
        oy = SubproblemY(problem, x_next, config.batch_size, config.full_batch)
        y_next = float(spg(oy, [y], SpgConfig(Ty, config.mu, config.mode_y), domain=y_box, rng=rng)[0])
        c2 = clock.cpu()
        if not (np.all(np.isfinite(x_next)) and math.isfinite(y_next)):
            raise DivergenceError("St-SPG iterate became non-finite", iteration=k)
        snap = StageSnapshot(k, x, y, x_next, y_next, c2, inner_x=Tx, inner_y=Ty, x_cpu=c1 - c0, y_cpu=c2 - c1)
        if config.snapshot_metrics:
            with clock.paused():
                snap.F_next = problem.eval_F(x_next)
                snap.grad_norm_next = float(np.linalg.norm(problem.full_gradient_F(x_next)))
                snap.joint_next = problem.f_value(x_next, y_next)
        snapshots.append(snap)
        if monitor is not None and (monitor.due(k) or k == config.K):
            monitor.record(k, x_next, F=snap.F_next if config.snapshot_metrics else None,
                           grad_norm=snap.grad_norm_next if config.snapshot_metrics else None,
                           extras={"y": y_next, "inner_x": Tx, "inner_y": Ty})
        x, y = x_next, y_next

    tau = int(sample_stage(np.random.default_rng(tau_seq), config.K, config.alpha_samp))
    chosen = snapshots[tau - 1]
    return StSpgResult(x_tau=chosen.x_next, tau=tau, x_tau_start=chosen.x_k, x_last=x, y_last=y,
                       snapshots=snapshots, dense_trace=dense)


def approx_stage_solution(problem, x_k, y_k, gamma, T, factor=50, mode_rule=StepRule.SMOOTH, full_batch=True):
    """Approximate v_k = argmin f_x^k + gamma/2 |x - x_k|^2 by SPG with ``factor`` times the budget."""
    ox = SubproblemX(problem, x_k, y_k, mode_for(problem), full_batch=full_batch)
    return spg(ox, x_k, SpgConfig(int(T) * factor, gamma, mode_rule), rng=np.random.default_rng(0))

"""Mini-batch stochastic proximal gradient (MSPG) on the joint variable w = (x, y).

Each iteration takes a projected gradient step on x and a proximal step on y with
the same step eta = c / L, where L is the joint smoothness constant of
f0(x, y) = g(x) - y ell(x), using mini-batches of size m_t = b (t + 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DivergenceError
from .problem import InfProjOracle, VarianceRegProblem
from .trace import Stopwatch


def joint_smoothness_L(L_g: float, G_ell: float, L_ell: float, D_y: float) -> float:
    """sqrt(max(2 L_g^2 + 4 L_ell^2 D_y^2 + G_ell^2, 4 G_ell^2))."""
    for name, v in (("L_g", L_g), ("G_ell", G_ell), ("L_ell", L_ell), ("D_y", D_y)):
        if v < 0:
            raise ValueError(f"{name} must be nonnegative")
    return math.sqrt(max(2 * L_g ** 2 + 4 * L_ell ** 2 * D_y ** 2 + G_ell ** 2, 4 * G_ell ** 2))


def batch_size_at(t: int, b: int, cap: int) -> int:
    """m_t = b (t + 1) for t = 0..T-1, capped."""
    return min(b * (t + 1), cap)


def rate_constants(c: float) -> tuple[float, float]:
    """(c1, c2) of the MSPG bound; informational only."""
    c1 = (2 * c * (1 - 2 * c) + 2) / (c * (1 - 2 * c))
    c2 = (6 - 4 * c) / (1 - 2 * c)
    return c1, c2


@dataclass
class MspgConfig:
    T: int
    c: float = 0.25
    b: int = 1
    batch_cap: Optional[int] = None
    L_override: Optional[float] = None
    D_y: Optional[float] = None
    loss_bound: Optional[float] = None
    seed: int = 0
    log_every: int = 1
    x0: Optional[np.ndarray] = None
    y0: Optional[float] = None

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise ValueError("T must be a positive integer")
        if not 0 < self.c < 0.5:
            raise ValueError(f"c must lie in (0, 1/2), got {self.c}")
        if self.b < 1:
            raise ValueError("b must be >= 1")
        if self.L_override is not None and not self.L_override > 0:
            raise ValueError("L_override must be positive")


@dataclass
class MspgLog:
    t: int
    batch: int
    y: float
    grad_F: float
    grad_x_f: float
    dist_y: float
    grad_mapping: float
    bridge_rhs: float


@dataclass
class MspgResult:
    x_tau: np.ndarray
    y_tau: float
    tau: int
    x_last: np.ndarray
    y_last: float
    L: float
    eta: float
    logs: list[MspgLog] = field(default_factory=list)
    full_batch_from: Optional[int] = None
    info: dict = field(default_factory=dict)


def _smoothness_inputs(problem, config, x0):
    """Return (problem to run on, L_g, G_ell, L_ell, D_y)."""
    if isinstance(problem, VarianceRegProblem):
        mean0 = float(problem.losses(x0).mean())
        D_y = config.D_y if config.D_y is not None else 10.0 * mean0
        bound = config.loss_bound if config.loss_bound is not None else D_y
        problem = problem.with_y_cap(D_y)
        L_g, G_ell, L_ell = problem.smoothness_constants(D_y, bound)
        return problem, L_g, G_ell, L_ell, D_y
    L_g, G_ell, L_ell = problem.smoothness_constants()
    D_y = config.D_y if config.D_y is not None else problem.D_y()
    return problem, L_g, G_ell, L_ell, D_y


def gradient_mapping(problem, x, y, eta) -> tuple[float, np.ndarray, float]:
    """|(w - w^+)/eta| for a full-batch prox-gradient step from w = (x, y)."""
    gx, gy = problem.f0_partial_grads(x, y)
    x_plus = problem.project_x(x - eta * gx)
    y_plus = problem.prox_h(y - eta * gy, eta)
    r = np.concatenate([x - x_plus, [y - y_plus]]) / eta
    return float(np.linalg.norm(r)), x_plus, y_plus


@np.errstate(over="ignore", invalid="ignore")  # divergence is reported by the guard below
def mspg(problem: InfProjOracle, config: MspgConfig, monitor=None) -> MspgResult:
    x = np.zeros(problem.dim_x) if config.x0 is None else np.array(config.x0, dtype=np.float64)
    x = problem.project_x(x)
    problem, L_g, G_ell, L_ell, D_y = _smoothness_inputs(problem, config, x)
    L = config.L_override if config.L_override is not None else joint_smoothness_L(L_g, G_ell, L_ell, D_y)
    if not L > 0:
        raise ValueError("joint smoothness constant is zero; pass L_override")
    eta = config.c / L
    lo, hi = problem.y_bounds
    y = float(problem.ystar(x)) if config.y0 is None else min(max(float(config.y0), lo), hi)
    cap = problem.n if config.batch_cap is None else min(int(config.batch_cap), problem.n)
    L_hconj, v = problem.h_conj_holder
    bridge_factor = G_ell * ((1 + v) / (2 * v)) ** v * L_hconj

    it_seq, tau_seq = np.random.SeedSequence(config.seed).spawn(2)
    rng = np.random.default_rng(it_seq)
    tau = int(np.random.default_rng(tau_seq).integers(1, config.T + 1))
    clock = monitor.clock if monitor is not None else Stopwatch()
    full = np.arange(problem.n, dtype=np.int64)
    logs: list[MspgLog] = []
    full_from = None
    x_tau, y_tau = x.copy(), y

    for t in range(1, config.T + 1):
        if t == tau:
            x_tau, y_tau = x.copy(), y
        m = batch_size_at(t - 1, config.b, cap)
        if m >= problem.n:
            batch = full
            if full_from is None:
                full_from = t
        else:
            batch = rng.integers(0, problem.n, size=m)
        if t % config.log_every == 0 or t == 1:
            with clock.paused():
                gm, _, _ = gradient_mapping(problem, x, y, eta)
                gF = float(np.linalg.norm(problem.full_gradient_F(x)))
                gxf = float(np.linalg.norm(problem.f_partial_grads(x, y)[0]))
                dy = problem.dist_y_subdiff(x, y)
                logs.append(MspgLog(t, m, y, gF, gxf, dy, gm, gxf + bridge_factor * dy ** v))
                if monitor is not None:
                    monitor.record(t, x, grad_norm=gF, extras={"y": y, "batch": m, "grad_mapping": gm})
        gx, gy = problem.f0_partial_grads(x, y, batch)
        x = problem.project_x(x - eta * gx)
        y = problem.prox_h(y - eta * gy, eta)
        if not (np.all(np.isfinite(x)) and math.isfinite(y)):
            raise DivergenceError("MSPG iterate became non-finite", iteration=t)

    c1, c2 = rate_constants(config.c)
    info = {"L_g": L_g, "G_ell": G_ell, "L_ell": L_ell, "D_y": D_y, "c1": c1, "c2": c2}
    return MspgResult(x_tau, y_tau, tau, x, y, L, eta, logs, full_from, info)

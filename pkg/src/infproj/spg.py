"""Stochastic proximal gradient for H(z) = f(z) + (gamma/2)|z - z1|^2.

Each step solves

    z_{t+1} = argmin_{z in box} <g_t, z> + gamma/2 |z - z1|^2 + 1/(2 eta_t) |z - z_t|^2
            = clip((gamma z1 + z_t / eta_t - g_t) / (gamma + 1/eta_t)),

which is exact for boxes because the objective is a separable isotropic quadratic.
The output is the t-weighted average of z_1..z_T.

Oracles follow a small protocol: ``draw(rng, T)`` pre-draws the randomness of a
whole run (or returns ``None`` for exact gradients), ``grad(z, draws[t])`` returns a
stochastic (sub)gradient and ``value(z)`` the exact objective. An oracle may also
expose ``fused_spg(z1, gamma, etas, draws, lower, upper)``, a compiled loop that is
used instead of the Python loop when no per-iteration callback is requested.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InfeasiblePointError, NonFiniteError


class StepRule(enum.Enum):
    SMOOTH = "smooth"  # eta_t = 3 / (gamma (t + 1)), needs gamma >= 3L
    NONSMOOTH = "nonsmooth"  # eta_t = 4 / (gamma t)


@dataclass(frozen=True)
class Box:
    """Axis-aligned convex set ``lower <= z <= upper`` (scalars broadcast)."""

    lower: float = -math.inf
    upper: float = math.inf

    @classmethod
    def nonneg(cls):
        return cls(0.0, math.inf)

    @classmethod
    def nonpos(cls):
        return cls(-math.inf, 0.0)

    def contains(self, z, tol=0.0) -> bool:
        z = np.asarray(z)
        return bool(np.all(z >= self.lower - tol) and np.all(z <= self.upper + tol))

    def project(self, z):
        return np.clip(z, self.lower, self.upper)


@dataclass
class SpgConfig:
    T: int
    gamma: float
    mode: StepRule = StepRule.SMOOTH
    seed: Optional[int] = None
    L_estimate: Optional[float] = None

    def __post_init__(self):
        self.mode = StepRule(self.mode)
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"T must be a positive integer, got {self.T}")
        self.T = int(self.T)
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


def step_sizes(gamma: float, T: int, mode=StepRule.SMOOTH) -> np.ndarray:
    t = np.arange(1, T + 1, dtype=np.float64)
    if StepRule(mode) is StepRule.SMOOTH:
        return 3.0 / (gamma * (t + 1.0))
    return 4.0 / (gamma * t)


def weighted_average(iterates) -> np.ndarray:
    """``sum_t t z_t / sum_t t`` over z_1..z_T."""
    z = np.asarray(iterates, dtype=np.float64)
    w = np.arange(1, len(z) + 1, dtype=np.float64)
    return np.tensordot(w, z, axes=1) / w.sum()


def spg(oracle, z1, config: SpgConfig, domain: Box = Box(), rng=None,
        callback: Callable[[int, np.ndarray], None] | None = None) -> np.ndarray:
    """Run SPG from ``z1`` (which is also the proximal center) and return the averaged iterate."""
    z1 = np.array(z1, dtype=np.float64, ndmin=1)
    if not domain.contains(z1):
        raise InfeasiblePointError("z1 lies outside the SPG domain")
    if config.L_estimate is not None and config.mode is StepRule.SMOOTH and config.gamma < 3 * config.L_estimate:
        warnings.warn(f"gamma={config.gamma} < 3L={3 * config.L_estimate}; smooth step rule is not covered",
                      RuntimeWarning, stacklevel=2)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    T, gamma = config.T, float(config.gamma)
    etas = step_sizes(gamma, T, config.mode)
    draws = oracle.draw(rng, T)

    fused = getattr(oracle, "fused_spg", None)
    if fused is not None and callback is None:
        out = fused(z1, gamma, etas, draws, domain.lower, domain.upper)
        if out is not None:
            out = np.array(out, dtype=np.float64, ndmin=1)
            if not np.all(np.isfinite(out)):
                raise NonFiniteError("SPG produced a non-finite iterate")
            return out

    z = z1.copy()
    acc = np.zeros_like(z1)
    for t in range(T):
        if callback is not None:
            callback(t + 1, z)
        acc += (t + 1) * z
        g = oracle.grad(z, None if draws is None else draws[t])
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite subgradient", iteration=t + 1)
        inv = 1.0 / etas[t]
        z = domain.project((gamma * z1 + inv * z - g) / (gamma + inv))
    return acc / (0.5 * T * (T + 1))

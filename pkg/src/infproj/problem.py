"""Inf-projection problems and the variance-regularized ERM instance.

An inf-projection problem is

    F(x) = g(x) + min_{y in dom h} h(y) - y * ell(x),

with joint function f(x, y) = g(x) + h(y) - y * ell(x) and smooth part
f0(x, y) = g(x) - y * ell(x). The solvers only see the oracle surface below.
"""
from __future__ import annotations

import abc
import enum
import math

import numpy as np

from . import kernels
from .data import Dataset
from .errors import BatchIndexError, DimensionError
from .sparse import SparseVec


class DomainY(enum.Enum):
    NONNEG = "nonneg"  # DC case
    NONPOS = "nonpos"  # bi-convex case
    FREE = "free"


class LossKind(enum.Enum):
    LOGISTIC = "logistic"
    TRUNCATED = "truncated"

    @property
    def code(self) -> int:
        return kernels.LOGISTIC if self is LossKind.LOGISTIC else kernels.TRUNCATED


def _as_model(x, dim=None) -> np.ndarray:
    if isinstance(x, SparseVec):
        x = x.to_dense()
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    if dim is not None and x.size != dim:
        raise ValueError(f"model has length {x.size}, expected {dim}")
    return x


# --- per-sample losses -------------------------------------------------------

def _sample_loss(x, sample, kind: LossKind, alpha: float):
    features, label = sample
    x = _as_model(x)
    if features.nnz and features.indices[-1] >= x.size:
        bad = int(features.indices[features.indices >= x.size][0])
        raise DimensionError(bad, x.size)
    label = float(label)
    margin = label * float(np.dot(features.values, x[features.indices]))
    loss, dloss = kernels.loss_dloss(np.array([margin]), kind.code, alpha)
    c = float(dloss[0]) * label
    vals = features.values * c
    keep = vals != 0.0
    grad = SparseVec._trusted(features.indices[keep], vals[keep], x.size)
    return float(loss[0]), grad


def logistic_loss(x, sample) -> tuple[float, SparseVec]:
    """``log(1 + exp(-label <x, a>))`` and its gradient, supported on the sample's features."""
    return _sample_loss(x, sample, LossKind.LOGISTIC, 1.0)


def truncated_loss(x, sample, alpha_trunc: float) -> tuple[float, SparseVec]:
    """``alpha log(1 + l/alpha)`` of the logistic loss ``l``; non-convex but bounded growth."""
    if not alpha_trunc > 0:
        raise ValueError("alpha_trunc must be positive")
    return _sample_loss(x, sample, LossKind.TRUNCATED, float(alpha_trunc))


# --- abstract oracle -----------------------------------------------------------

class InfProjOracle(abc.ABC):
    """Finite-sum oracle for an inf-projection problem with scalar ``y``.

    ``batch`` arguments are index arrays into the sample set (duplicates allowed);
    ``None`` means the full sample set. Every batch call is the mean of the
    corresponding single-sample calls.
    """

    dim_x: int
    dim_y: int = 1
    n: int
    domain_y: DomainY

    # -- required surface
    @abc.abstractmethod
    def g_value_grad(self, x, batch=None) -> tuple[float, np.ndarray]:
        ...

    @abc.abstractmethod
    def ell_value(self, x, batch=None) -> float:
        ...

    @abc.abstractmethod
    def ell_jacobian_vec(self, x, y, batch=None) -> np.ndarray:
        """``grad ell(x)^T y``."""

    @abc.abstractmethod
    def h_value_grad(self, y) -> tuple[float, float]:
        ...

    @abc.abstractmethod
    def prox_h(self, y_hat, eta):
        ...

    @abc.abstractmethod
    def ystar(self, x) -> float:
        """Unique minimizer of ``h(y) - y ell(x)`` over dom h."""

    @property
    @abc.abstractmethod
    def h_conj_holder(self) -> tuple[float, float]:
        """``(L, v)`` Hölder constants of the conjugate gradient ``grad h*``."""

    # -- hooks with defaults
    def project_x(self, x):
        return x

    @property
    def y_bounds(self) -> tuple[float, float]:
        if self.domain_y is DomainY.NONNEG:
            return 0.0, math.inf
        if self.domain_y is DomainY.NONPOS:
            return -math.inf, 0.0
        return -math.inf, math.inf

    def check_batch(self, batch) -> np.ndarray:
        if batch is None:
            return np.arange(self.n, dtype=np.int64)
        b = np.asarray(batch, dtype=np.int64).ravel()
        if b.size == 0:
            raise ValueError("batch must be non-empty")
        bad = (b < 0) | (b >= self.n)
        if bad.any():
            raise BatchIndexError(b[bad][0], self.n)
        return b

    # -- derived quantities
    def f0_value(self, x, y) -> float:
        return self.g_value_grad(x)[0] - y * self.ell_value(x)

    def f_value(self, x, y) -> float:
        return self.f0_value(x, y) + self.h_value_grad(y)[0]

    def f0_partial_grads(self, x, y, batch=None) -> tuple[np.ndarray, float]:
        """Mini-batch ``(grad_x f0, grad_y f0)``; ``grad_y f0 = -ell(x)``."""
        b = self.check_batch(batch)
        gx = self.g_value_grad(x, b)[1] - self.ell_jacobian_vec(x, y, b)
        return gx, -self.ell_value(x, b)

    def f_partial_grads(self, x, y, batch=None) -> tuple[np.ndarray, float]:
        gx, gy = self.f0_partial_grads(x, y, batch)
        return gx, gy + self.h_value_grad(y)[1]

    def eval_F(self, x) -> float:
        y = self.ystar(x)
        return self.f_value(x, y)

    def full_gradient_F(self, x) -> np.ndarray:
        y = self.ystar(x)
        return self.g_value_grad(x)[1] - self.ell_jacobian_vec(x, y)

    def dist_y_subdiff(self, x, y) -> float:
        """``dist(0, d_y f(x, y))`` including the normal cone of the y-domain."""
        gy = self.h_value_grad(y)[1] - self.ell_value(x)
        lo, hi = self.y_bounds
        if y <= lo and gy > 0:
            return 0.0
        if y >= hi and gy < 0:
            return 0.0
        return abs(gy)


# --- variance-regularized ERM ----------------------------------------------

class VarianceRegProblem(InfProjOracle):
    """Variance-regularized empirical risk as an inf-projection problem.

    F(x) = mean l + lam/(2n) sum l^2 + lam * min_{y>=0} (y^2/2 - y mean l)
         = mean l + (lam/2) * biased variance of the losses.

    Mapped onto the oracle surface with g = mean(l + lam l^2 / 2),
    ell = lam * mean l and h(y) = lam y^2 / 2 on y >= 0, so y*(x) = mean l.
    """

    domain_y = DomainY.NONNEG

    def __init__(self, data: Dataset, lam: float, loss_kind="logistic", alpha_trunc=None, y_cap=math.inf):
        if not lam >= 0:
            raise ValueError("lam must be nonnegative")
        self.data = data
        self.lam = float(lam)
        self.loss_kind = LossKind(loss_kind)
        if self.loss_kind is LossKind.TRUNCATED:
            if alpha_trunc is None:
                alpha_trunc = math.sqrt(10 * data.n)
            if not alpha_trunc > 0:
                raise ValueError("alpha_trunc must be positive")
        self.alpha_trunc = float(alpha_trunc) if alpha_trunc is not None else 1.0
        self.y_cap = float(y_cap)
        self.dim_x = data.dim
        self.n = data.n
        self._all = np.arange(self.n, dtype=np.int64)
        self._all.setflags(write=False)

    def with_y_cap(self, y_cap: float) -> "VarianceRegProblem":
        return VarianceRegProblem(self.data, self.lam, self.loss_kind, self.alpha_trunc, y_cap)

    @property
    def y_bounds(self):
        return 0.0, self.y_cap

    # -- kernel plumbing
    def _k(self):
        d = self.data
        return d.indptr, d.indices, d.data, d.labels

    def losses(self, x, batch=None) -> np.ndarray:
        x = _as_model(x, self.dim_x)
        b = self._all if batch is None else self.check_batch(batch)
        return kernels.batch_losses(*self._k(), b, x, self.loss_kind.code, self.alpha_trunc)

    def _grad(self, x, b, a, bcoef, weights=None):
        out = np.zeros(self.dim_x)
        s1, s2 = kernels.accumulate_grad(*self._k(), b, x, self.loss_kind.code, self.alpha_trunc,
                                         a, bcoef, weights, out)
        return out, s1, s2

    def sample(self, i):
        return self.data.sample(i)

    def sample_loss(self, x, i) -> tuple[float, SparseVec]:
        if self.loss_kind is LossKind.LOGISTIC:
            return logistic_loss(x, self.data.sample(i))
        return truncated_loss(x, self.data.sample(i), self.alpha_trunc)

    # -- oracle surface
    def g_value_grad(self, x, batch=None):
        x = _as_model(x, self.dim_x)
        b = self._all if batch is None else self.check_batch(batch)
        gx, s1, s2 = self._grad(x, b, 1.0, self.lam)
        m = b.size
        return (s1 + 0.5 * self.lam * s2) / m, gx / m

    def ell_value(self, x, batch=None):
        return self.lam * float(self.losses(x, batch).mean())

    def ell_jacobian_vec(self, x, y, batch=None):
        x = _as_model(x, self.dim_x)
        b = self._all if batch is None else self.check_batch(batch)
        gx, _, _ = self._grad(x, b, 1.0, 0.0)
        return (self.lam * float(y) / b.size) * gx

    def h_value_grad(self, y):
        y = float(y)
        if y < 0.0 or y > self.y_cap:
            return math.inf, self.lam * y
        return 0.5 * self.lam * y * y, self.lam * y

    def prox_h(self, y_hat, eta):
        """``argmin_{0<=y<=cap} lam y^2/2 + (y - y_hat)^2 / (2 eta)``."""
        if not eta > 0:
            raise ValueError("eta must be positive")
        return min(max(0.0, float(y_hat) / (1.0 + eta * self.lam)), self.y_cap)

    def ystar(self, x):
        # losses are nonnegative, so the unconstrained minimizer already satisfies y >= 0
        return min(float(self.losses(x).mean()), self.y_cap)

    @property
    def h_conj_holder(self):
        return (1.0 / self.lam if self.lam > 0 else math.inf), 1.0

    # -- closed forms
    def eval_F(self, x) -> float:
        l = self.losses(x)
        mean = float(l.mean())
        y = min(mean, self.y_cap)
        return mean + 0.5 * self.lam * float(np.dot(l, l)) / l.size + self.lam * (0.5 * y * y - y * mean)

    def eval_F_expanded(self, x) -> float:
        """Same objective via ``mean l + (lam/2) [mean l^2 - (mean l)^2]``."""
        l = self.losses(x)
        mean = float(l.mean())
        return mean + 0.5 * self.lam * (float(np.dot(l, l)) / l.size - mean * mean)

    def full_gradient_F(self, x) -> np.ndarray:
        x = _as_model(x, self.dim_x)
        y = self.ystar(x)
        gx, _, _ = self._grad(x, self._all, 1.0 - self.lam * y, self.lam)
        return gx / self.n

    def erm_gradient(self, x) -> np.ndarray:
        x = _as_model(x, self.dim_x)
        gx, _, _ = self._grad(x, self._all, 1.0, 0.0)
        return gx / self.n

    def stochastic_grads(self, x, y, batch) -> tuple[np.ndarray, float]:
        """Batch-mean partial gradients of the joint objective f(x, y)."""
        x = _as_model(x, self.dim_x)
        b = self.check_batch(batch)
        y = float(y)
        gx, s1, _ = self._grad(x, b, 1.0 - self.lam * y, self.lam)
        return gx / b.size, self.lam * (y - s1 / b.size)

    # -- fused stage solvers (see spg.spg)
    def fused_spg_x(self, z1, xk, yk, gamma, etas, draws_g, draws_l, lower, upper):
        return kernels.spg_x_stage(*self._k(), self.loss_kind.code, self.alpha_trunc, self.lam,
                                   np.ascontiguousarray(z1, dtype=np.float64),
                                   np.ascontiguousarray(xk, dtype=np.float64), float(yk),
                                   float(gamma), etas, draws_g, draws_l, float(lower), float(upper))

    def fused_spg_y(self, x, y1, mu, etas, draws, lower, upper):
        return kernels.spg_y_stage(*self._k(), self.loss_kind.code, self.alpha_trunc, self.lam,
                                   np.ascontiguousarray(x, dtype=np.float64), float(y1), float(mu),
                                   etas, draws, float(lower), float(upper))

    # -- evaluation helpers
    def predict(self, x, data: Dataset | None = None) -> np.ndarray:
        data = self.data if data is None else data
        x = _as_model(x, data.dim)
        scores = data.X @ x
        return np.where(scores >= 0.0, 1.0, -1.0)

    def zero_one_error(self, x, data: Dataset | None = None) -> float:
        data = self.data if data is None else data
        return float(np.mean(self.predict(x, data) != data.labels))

    def smoothness_constants(self, D_y: float, loss_bound: float) -> tuple[float, float, float]:
        """Conservative ``(L_g, G_ell, L_ell)`` for the joint-smoothness bound.

        Uses |dl/dm| <= 1 and d^2l/dm^2 <= 1/4 for the logistic margin loss (the
        truncation only shrinks both), with R the largest row norm.
        """
        R = float(self.data.row_norms().max()) if self.data.X.nnz else 0.0
        L_g = 0.25 * R * R * (1.0 + self.lam * loss_bound) + self.lam * R * R
        G_ell = self.lam * R
        L_ell = 0.25 * self.lam * R * R
        return L_g, G_ell, L_ell


def prox_quadratic_nonneg(y_hat: float, eta: float, lam: float) -> float:
    """``argmin_{y>=0} lam y^2/2 + (y - y_hat)^2/(2 eta) = max(0, y_hat / (1 + eta lam))``."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    return max(0.0, float(y_hat) / (1.0 + eta * lam))

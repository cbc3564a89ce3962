"""Synthetic problems and datasets with known structure.

Used by the test-suite, the diagnostics checks and the desk-scale benchmarks.
``make_a9a_like`` produces a stand-in for the a9a libsvm file (same row count,
feature count, one-hot layout and class balance) for machines without the file.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from .data import Dataset
from .problem import DomainY, InfProjOracle

# one-hot group sizes of the binarized Adult census attributes (sum = 123)
A9A_GROUPS = (5, 8, 5, 16, 5, 7, 14, 6, 5, 2, 2, 2, 5, 41)
A9A_N = 32561
A9A_POS_RATIO = 0.3172  # positives : negatives


def make_a9a_like(n: int = A9A_N, seed: int = 0) -> Dataset:
    """Census-style binary one-hot data: 14 categorical groups, 123 features."""
    rng = np.random.default_rng(seed)
    dim = sum(A9A_GROUPS)
    offsets = np.concatenate([[0], np.cumsum(A9A_GROUPS)[:-1]])
    weights = rng.normal(0.0, 1.2, size=dim)
    cols = np.empty((n, len(A9A_GROUPS)), dtype=np.int64)
    for g, (size, off) in enumerate(zip(A9A_GROUPS, offsets)):
        p = rng.dirichlet(np.full(size, 0.8))
        cols[:, g] = off + rng.choice(size, size=n, p=p)
    # about 7% of rows miss one attribute, as in the census source
    missing = rng.random(n) < 0.07
    drop = rng.integers(0, len(A9A_GROUPS), size=n)
    mask = np.ones_like(cols, dtype=bool)
    mask[np.flatnonzero(missing), drop[missing]] = False
    score = (weights[cols] * mask).sum(axis=1)
    u = rng.random(n)
    target = A9A_POS_RATIO / (1.0 + A9A_POS_RATIO)

    def pos_frac(b):
        return np.mean(u < 1.0 / (1.0 + np.exp(-(score + b))))

    lo, hi = -30.0, 30.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if pos_frac(mid) < target:
            lo = mid
        else:
            hi = mid
    labels = np.where(u < 1.0 / (1.0 + np.exp(-(score + 0.5 * (lo + hi)))), 1.0, -1.0)
    rows = np.repeat(np.arange(n), len(A9A_GROUPS))[mask.ravel()]
    X = sp.csr_matrix((np.ones(rows.size), (rows, cols.ravel()[mask.ravel()])), shape=(n, dim))
    return Dataset(X, labels)


def make_logistic_data(n: int, d: int, seed: int = 0, density: float = 1.0, flip: float = 0.1) -> Dataset:
    """Gaussian features, labels from a random linear model with ``flip`` label noise."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d)) / math.sqrt(d)
    if density < 1.0:
        X *= rng.random((n, d)) < density
    w = rng.normal(size=d) * 2.0
    labels = np.where(X @ w >= 0, 1.0, -1.0)
    labels[rng.random(n) < flip] *= -1.0
    return Dataset(sp.csr_matrix(X), labels)


class QuadraticInfProj(InfProjOracle):
    """Finite-sum quadratic/linear inf-projection problem with a closed-form stationary point.

    g(x) = mean_i (a_i^T x - b_i)^2 / 2 + reg |x|^2 / 2,
    ell(x) = mean_i (c_i^T x + e_i),   h(y) = lam y^2 / 2 on the y-domain (optionally capped).
    """

    def __init__(self, A, b, C, e, lam, reg=0.0, domain_y=DomainY.NONPOS, y_cap=math.inf):
        self.A = np.asarray(A, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        self.C = np.asarray(C, dtype=np.float64)
        self.e = np.asarray(e, dtype=np.float64)
        self.lam = float(lam)
        self.reg = float(reg)
        self.domain_y = DomainY(domain_y)
        self.y_cap = float(y_cap)
        self.n, self.dim_x = self.A.shape

    @property
    def y_bounds(self):
        lo, hi = super().y_bounds
        return max(lo, -self.y_cap), min(hi, self.y_cap)

    def _rows(self, batch):
        return self.check_batch(batch)

    def g_value_grad(self, x, batch=None):
        b = self._rows(batch)
        x = np.asarray(x, dtype=np.float64)
        r = self.A[b] @ x - self.b[b]
        val = 0.5 * float(np.dot(r, r)) / b.size + 0.5 * self.reg * float(np.dot(x, x))
        return val, self.A[b].T @ r / b.size + self.reg * x

    def ell_value(self, x, batch=None):
        b = self._rows(batch)
        return float(np.mean(self.C[b] @ np.asarray(x, dtype=np.float64) + self.e[b]))

    def ell_jacobian_vec(self, x, y, batch=None):
        b = self._rows(batch)
        return float(y) * self.C[b].mean(axis=0)

    def h_value_grad(self, y):
        lo, hi = self.y_bounds
        y = float(y)
        if y < lo or y > hi:
            return math.inf, self.lam * y
        return 0.5 * self.lam * y * y, self.lam * y

    def prox_h(self, y_hat, eta):
        lo, hi = self.y_bounds
        return min(max(float(y_hat) / (1.0 + eta * self.lam), lo), hi)

    def ystar(self, x):
        lo, hi = self.y_bounds
        return min(max(self.ell_value(x) / self.lam, lo), hi)

    @property
    def h_conj_holder(self):
        return 1.0 / self.lam, 1.0

    # -- constants and reference solutions
    def hessian_g(self):
        return self.A.T @ self.A / self.n + self.reg * np.eye(self.dim_x)

    def smoothness_constants(self):
        L_g = float(np.linalg.eigvalsh(self.hessian_g()).max())
        G_ell = float(np.linalg.norm(self.C.mean(axis=0)))
        return L_g, G_ell, 0.0

    def D_y(self):
        lo, hi = self.y_bounds
        return max(abs(lo), abs(hi))

    def stationary_point(self):
        """Solve grad F = 0 assuming y*(x) is interior: (H - c c^T/lam) x = A^T b/n + e c/lam."""
        c = self.C.mean(axis=0)
        ebar = float(self.e.mean())
        M = self.hessian_g() - np.outer(c, c) / self.lam
        rhs = self.A.T @ self.b / self.n + ebar * c / self.lam
        return np.linalg.solve(M, rhs)


def make_quadratic_infproj(n=2000, d=5, seed=0, y_target=-0.5, noise=0.5, domain_y=DomainY.NONPOS,
                           reg=0.5, y_cap=10.0) -> QuadraticInfProj:
    """Random instance whose stationary point has ``y*(x*) = y_target`` strictly inside dom h.

    lam is chosen so ``H - c c^T / lam`` stays positive definite, making the stationary
    point the unique minimizer of F near which y* is interior.
    """
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, d)) / math.sqrt(d)
    b = rng.normal(size=n)
    c0 = rng.normal(size=d)
    C = c0 + noise * rng.normal(size=(n, d))
    H = A.T @ A / n + reg * np.eye(d)
    c = C.mean(axis=0)
    lam = 2.0 * float(c @ np.linalg.solve(H, c)) + 1.0
    x = np.linalg.solve(H, A.T @ b / n + y_target * c)
    e = noise * rng.normal(size=n)
    e += lam * y_target - float(np.mean(C @ x + e))
    return QuadraticInfProj(A, b, C, e, lam, reg=reg, domain_y=domain_y, y_cap=y_cap)


class QuadraticOracle:
    """f(z) = |z - a|^2 / 2 with optional additive Gaussian gradient noise."""

    def __init__(self, a, noise_std: float = 0.0):
        self.a = np.asarray(a, dtype=np.float64)
        self.noise_std = float(noise_std)
        self.dim = self.a.size
        self.smoothness = 1.0

    def draw(self, rng, T):
        if self.noise_std == 0.0:
            return None
        return self.noise_std * rng.normal(size=(T, self.dim))

    def grad(self, z, sample=None):
        g = z - self.a
        return g if sample is None else g + sample

    def value(self, z):
        r = np.asarray(z) - self.a
        return 0.5 * float(np.dot(r, r))


class ZeroOracle:
    def __init__(self, dim):
        self.dim = dim

    def draw(self, rng, T):
        return None

    def grad(self, z, sample=None):
        return np.zeros(self.dim)

    def value(self, z):
        return 0.0

"""Canonical sparse vectors: strictly increasing indices, no stored zeros."""
from __future__ import annotations

import numpy as np

from .errors import DimensionError


class SparseVec:
    """Immutable sparse vector of length ``dim``.

    Two instances compare equal iff their dimension and entry lists are identical.
    """

    __slots__ = ("indices", "values", "dim")

    def __init__(self, indices, values, dim: int):
        idx = np.asarray(indices, dtype=np.int64).ravel()
        val = np.asarray(values, dtype=np.float64).ravel()
        if idx.shape != val.shape:
            raise ValueError("indices and values must have the same length")
        dim = int(dim)
        if dim < 0:
            raise ValueError("dim must be nonnegative")
        if idx.size:
            if idx[0] < 0:
                raise DimensionError(idx[0], dim)
            if idx[-1] >= dim:
                raise DimensionError(idx[-1], dim)
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
            if np.any(val == 0.0):
                raise ValueError("canonical SparseVec cannot store zeros")
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "dim", dim)

    def __setattr__(self, name, value):
        raise AttributeError("SparseVec is immutable")

    @classmethod
    def from_pairs(cls, pairs, dim: int) -> "SparseVec":
        """Build from unordered ``(index, value)`` pairs; zeros are dropped."""
        pairs = sorted((int(i), float(v)) for i, v in pairs if v != 0.0)
        for a, b in zip(pairs, pairs[1:]):
            if a[0] == b[0]:
                raise ValueError(f"duplicate index {a[0]}")
        if not pairs:
            return cls([], [], dim)
        idx, val = zip(*pairs)
        return cls(idx, val, dim)

    @classmethod
    def from_dense(cls, x) -> "SparseVec":
        x = np.asarray(x, dtype=np.float64).ravel()
        nz = np.flatnonzero(x)
        return cls(nz, x[nz], x.size)

    @classmethod
    def _trusted(cls, indices, values, dim):
        # skips validation; callers guarantee canonical form
        obj = cls.__new__(cls)
        indices = np.asarray(indices, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        object.__setattr__(obj, "indices", indices)
        object.__setattr__(obj, "values", values)
        object.__setattr__(obj, "dim", int(dim))
        return obj

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def __array__(self, dtype=None, copy=None):
        out = self.to_dense()
        return out if dtype is None else out.astype(dtype)

    def dot(self, x) -> float:
        """Inner product with a dense vector (or another SparseVec)."""
        if isinstance(x, SparseVec):
            x = x.to_dense()
        x = np.asarray(x, dtype=np.float64)
        if self.indices.size and self.indices[-1] >= x.size:
            raise DimensionError(self.indices[-1], x.size)
        return float(np.dot(self.values, x[self.indices]))

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def scale(self, c: float) -> "SparseVec":
        if c == 0.0:
            return SparseVec([], [], self.dim)
        vals = self.values * c
        keep = vals != 0.0
        return SparseVec._trusted(self.indices[keep], vals[keep], self.dim)

    def __eq__(self, other):
        if not isinstance(other, SparseVec):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.dim, self.indices.tobytes(), self.values.tobytes()))

    def __len__(self):
        return self.dim

    def __repr__(self):
        return f"SparseVec(dim={self.dim}, entries={self.entries})"

"""libsvm-format sparse datasets, train/test splits and subsampling."""
from __future__ import annotations

import io
import math
import os
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

from .errors import EmptyDatasetError, ParseError
from .sparse import SparseVec


class Dataset:
    """Immutable sparse design matrix with ±1 labels.

    Rows are stored in CSR form with sorted column indices and no explicit zeros.
    ``indptr``/``indices``/``data`` are int64/int64/float64 views used by the kernels.
    """

    def __init__(self, X, labels, dim: int | None = None):
        X = sp.csr_matrix(X, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.float64).ravel()
        if X.shape[0] == 0:
            raise EmptyDatasetError("dataset must contain at least one row")
        if labels.size != X.shape[0]:
            raise ValueError(f"{labels.size} labels for {X.shape[0]} rows")
        if not np.all(np.abs(labels) == 1.0):
            raise ValueError("labels must be +1 or -1")
        if dim is not None and dim != X.shape[1]:
            if dim < X.shape[1] and X.nnz and X.indices.max() >= dim:
                raise ValueError(f"dim={dim} smaller than largest feature index")
            X = sp.csr_matrix((X.data, X.indices, X.indptr), shape=(X.shape[0], dim))
        X.eliminate_zeros()
        X.sort_indices()
        X.sum_duplicates()
        self.X = X
        self.labels = labels
        self.indptr = X.indptr.astype(np.int64)
        self.indices = X.indices.astype(np.int64)
        self.data = X.data.astype(np.float64)
        for arr in (self.labels, self.indptr, self.indices, self.data):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def row(self, i: int) -> SparseVec:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return SparseVec._trusted(self.indices[lo:hi], self.data[lo:hi], self.dim)

    @property
    def rows(self) -> list[SparseVec]:
        return [self.row(i) for i in range(self.n)]

    def sample(self, i: int) -> tuple[SparseVec, float]:
        return self.row(i), float(self.labels[i])

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.labels[idx], dim=self.dim)

    def with_dim(self, dim: int) -> "Dataset":
        return Dataset(self.X, self.labels, dim=dim)

    def row_norms(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.X.multiply(self.X).sum(axis=1)).ravel())

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.X.shape == other.X.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
            and np.array_equal(self.labels, other.labels)
        )

    def __repr__(self):
        pos = int(np.sum(self.labels > 0))
        return f"Dataset(n={self.n}, dim={self.dim}, nnz={self.X.nnz}, pos={pos})"


def _parse_label(tok: str, line_no: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(line_no, f"non-numeric label {tok!r}") from None
    if v == 1.0:
        return 1.0
    if v == -1.0 or v == 0.0:
        return -1.0
    raise ParseError(line_no, f"label {tok!r} is not binary (expected +1/-1 or 0/1)")


def parse_libsvm(stream: TextIO | Iterable[str], dim: int | None = None) -> Dataset:
    """Parse libsvm text: ``label idx:val idx:val ...`` with 1-based indices.

    Blank lines and ``#`` comments are skipped; zero values are dropped; indices
    within a line may appear in any order but must not repeat.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    labels: list[float] = []
    max_idx = -1
    for line_no, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        labels.append(_parse_label(toks[0], line_no))
        row = []
        for tok in toks[1:]:
            key, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(line_no, f"malformed token {tok!r}")
            try:
                j = int(key)
            except ValueError:
                raise ParseError(line_no, f"non-integer index in {tok!r}") from None
            try:
                v = float(val)
            except ValueError:
                raise ParseError(line_no, f"non-numeric value in {tok!r}") from None
            if j < 1:
                raise ParseError(line_no, f"index {j} must be >= 1")
            if not math.isfinite(v):
                raise ParseError(line_no, f"non-finite value in {tok!r}")
            row.append((j - 1, v))
        row.sort()
        for a, b in zip(row, row[1:]):
            if a[0] == b[0]:
                raise ParseError(line_no, f"duplicate index {a[0] + 1}")
        for j, v in row:
            if v != 0.0:
                indices.append(j)
                values.append(v)
                max_idx = max(max_idx, j)
        indptr.append(len(indices))
    if not labels:
        raise EmptyDatasetError("no data rows found")
    ncols = max_idx + 1
    if dim is not None:
        if dim < ncols:
            raise ParseError(0, f"feature index {ncols} exceeds dim override {dim}")
        ncols = dim
    X = sp.csr_matrix(
        (np.array(values, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr)),
        shape=(len(labels), ncols),
    )
    return Dataset(X, labels)


def load_libsvm(path: str | os.PathLike, dim: int | None = None) -> Dataset:
    with open(path, "r", encoding="ascii") as fh:
        return parse_libsvm(fh, dim=dim)


def write_libsvm(data: Dataset, stream: TextIO) -> None:
    for i in range(data.n):
        lo, hi = data.indptr[i], data.indptr[i + 1]
        label = "+1" if data.labels[i] > 0 else "-1"
        feats = " ".join(
            f"{j + 1}:{v!r}" for j, v in zip(data.indices[lo:hi].tolist(), data.data[lo:hi].tolist())
        )
        stream.write(f"{label} {feats}".rstrip() + "\n")


def dumps_libsvm(data: Dataset) -> str:
    buf = io.StringIO()
    write_libsvm(data, buf)
    return buf.getvalue()


def train_size(n: int, frac: float) -> int:
    # tolerance guards against 0.7 * 10 = 7.000000000000001
    k = math.ceil(frac * n - 1e-9)
    return min(max(k, 1), n - 1)


def split_indices(n: int, frac: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < frac < 1.0:
        raise ValueError(f"frac must lie in (0, 1), got {frac}")
    if n < 2:
        raise EmptyDatasetError(f"cannot split a dataset of {n} rows")
    perm = np.random.default_rng(seed).permutation(n)
    k = train_size(n, frac)
    return np.sort(perm[:k]), np.sort(perm[k:])


def split_train_test(data: Dataset, frac: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Random disjoint train/test partition of sizes ceil(frac*n) and the rest."""
    tr, te = split_indices(data.n, frac, seed)
    return data.take(tr), data.take(te)


def subsample(data: Dataset, size: int | float, seed: int = 0) -> Dataset:
    """Uniform subsample without replacement; ``size`` is a count or a fraction."""
    if isinstance(size, float) and size <= 1.0:
        k = max(1, int(round(size * data.n)))
    else:
        k = int(size)
    if not 1 <= k <= data.n:
        raise ValueError(f"subsample size {k} outside [1, {data.n}]")
    idx = np.sort(np.random.default_rng(seed).choice(data.n, size=k, replace=False))
    return data.take(idx)

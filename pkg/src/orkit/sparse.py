"""Compressed sparse storage used by the model builder and the simplex kernels.

All index arrays are 0-based ``int64``; values are ``float64``. The
classes are plain containers. They do not copy their inputs and are
treated as immutable once built.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "CSCMatrix",
    "CSRMatrix",
    "SparseVector",
    "csc_to_csr",
    "csr_to_csc",
]


def _as_index(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _as_value(a):
    return np.ascontiguousarray(a, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class _Compressed:
    m: int
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indptr", _as_index(self.indptr))
        object.__setattr__(self, "indices", _as_index(self.indices))
        object.__setattr__(self, "data", _as_value(self.data))

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1]) if len(self.indptr) else 0

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    def _check(self, nmajor, nminor):
        p = self.indptr
        if len(p) != nmajor + 1 or p[0] != 0:
            raise ValueError("pointer array has wrong length or does not start at 0")
        if np.any(np.diff(p) < 0):
            raise ValueError("pointer array must be nondecreasing")
        if len(self.indices) != p[-1] or len(self.data) != p[-1]:
            raise ValueError("index/value arrays disagree with pointer array")
        for k in range(nmajor):
            seg = self.indices[p[k] : p[k + 1]]
            if len(seg) and (seg[0] < 0 or seg[-1] >= nminor or np.any(np.diff(seg) <= 0)):
                raise ValueError(f"indices of slice {k} are not strictly increasing in range")

    def same_storage(self, other) -> bool:
        """Bitwise equality of the stored arrays."""
        return (
            type(self) is type(other)
            and self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and self.data.tobytes() == other.data.tobytes()
        )


@dataclass(frozen=True, eq=False)
class CSCMatrix(_Compressed):
    """``m x n`` matrix stored by columns."""

    def check(self) -> "CSCMatrix":
        self._check(self.n, self.m)
        return self

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.m, self.n))
        for j in range(self.n):
            lo, hi = self.indptr[j], self.indptr[j + 1]
            out[self.indices[lo:hi], j] += self.data[lo:hi]
        return out

    @classmethod
    def from_dense(cls, a) -> "CSCMatrix":
        a = np.asarray(a, dtype=np.float64)
        m, n = a.shape
        cols, rows = np.nonzero(a.T)  # column-major traversal
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, cols + 1, 1)
        return cls(m, n, np.cumsum(indptr), rows, a[rows, cols])

    def to_csr(self) -> "CSRMatrix":
        return csc_to_csr(self)


@dataclass(frozen=True, eq=False)
class CSRMatrix(_Compressed):
    """``m x n`` matrix stored by rows."""

    def check(self) -> "CSRMatrix":
        self._check(self.m, self.n)
        return self

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.m, self.n))
        for i in range(self.m):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            out[i, self.indices[lo:hi]] += self.data[lo:hi]
        return out

    @classmethod
    def from_dense(cls, a) -> "CSRMatrix":
        a = np.asarray(a, dtype=np.float64)
        m, n = a.shape
        rows, cols = np.nonzero(a)
        indptr = np.zeros(m + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        return cls(m, n, np.cumsum(indptr), cols, a[rows, cols])

    def to_csc(self) -> CSCMatrix:
        return csr_to_csc(self)


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Length-``n`` vector holding only the listed entries.

    Indices are unique but need not be sorted; stored order is the
    iteration order of every sparse kernel.
    """

    n: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", _as_index(self.indices))
        object.__setattr__(self, "values", _as_value(self.values))
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values must have equal length")

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def check(self) -> "SparseVector":
        idx = self.indices
        if len(idx) and (idx.min() < 0 or idx.max() >= self.n):
            raise ValueError("sparse vector index out of range")
        if len(np.unique(idx)) != len(idx):
            raise ValueError("sparse vector indices must be unique")
        return self

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.n)
        out[self.indices] = self.values
        return out

    def sorted(self) -> "SparseVector":
        """Copy with indices in increasing order (for comparisons)."""
        order = np.argsort(self.indices, kind="stable")
        return SparseVector(self.n, self.indices[order], self.values[order])

    @classmethod
    def from_dense(cls, x) -> "SparseVector":
        x = np.asarray(x, dtype=np.float64)
        idx = np.flatnonzero(x)
        return cls(len(x), idx, x[idx])

    def __len__(self):
        return self.n


@numba.njit(cache=True)
def _transpose_storage(nmajor, nminor, indptr, indices, data):
    counts = np.zeros(nminor + 1, dtype=np.int64)
    for k in range(indptr[nmajor]):
        counts[indices[k] + 1] += 1
    for i in range(nminor):
        counts[i + 1] += counts[i]
    out_ptr = counts.copy()
    nnz = indptr[nmajor]
    out_idx = np.empty(nnz, dtype=np.int64)
    out_val = np.empty(nnz, dtype=np.float64)
    fill = counts[:nminor].copy()
    for j in range(nmajor):
        for k in range(indptr[j], indptr[j + 1]):
            i = indices[k]
            dst = fill[i]
            out_idx[dst] = j
            out_val[dst] = data[k]
            fill[i] = dst + 1
    return out_ptr, out_idx, out_val


def csc_to_csr(A: CSCMatrix) -> CSRMatrix:
    ptr, idx, val = _transpose_storage(A.n, A.m, A.indptr, A.indices, A.data)
    return CSRMatrix(A.m, A.n, ptr, idx, val)


def csr_to_csc(A: CSRMatrix) -> CSCMatrix:
    ptr, idx, val = _transpose_storage(A.m, A.n, A.indptr, A.indices, A.data)
    return CSCMatrix(A.m, A.n, ptr, idx, val)

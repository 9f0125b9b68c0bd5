"""Revised dual simplex building blocks.

Three operations that account for a large share of a dual simplex
iteration, each in a dense-vector and a sparse-vector flavour:

* row of the tableau, ``A_N^T x`` (column-wise dot products restricted by
  a flag vector) and ``A^T x`` as a linear combination of matrix rows;
* the two-pass (Harris) ratio test;
* ``y <- a*x + y`` with a feasibility check on every updated entry.

The inner loops are compiled with numba. The public functions validate
shapes and dispatch on the vector type.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .sparse import CSCMatrix, CSRMatrix, SparseVector

__all__ = [
    "LOWER",
    "BASIC",
    "RatioTestResult",
    "state_vector",
    "restricted_transpose_matvec_dense",
    "transpose_matvec_sparse",
    "ratio_test",
    "axpy_checked",
]

LOWER = 0
BASIC = 1


def state_vector(states) -> np.ndarray:
    """Encode a sequence of ``"lower"``/``"basic"`` (or 0/1) as a uint8 array."""
    out = np.empty(len(states), dtype=np.uint8)
    for i, s in enumerate(states):
        if s in ("lower", LOWER):
            out[i] = LOWER
        elif s in ("basic", BASIC):
            out[i] = BASIC
        else:
            raise ValueError(f"unknown variable state {s!r}")
    return out


@dataclass(frozen=True)
class RatioTestResult:
    """Outcome of :func:`ratio_test`.

    ``result`` is the chosen index, or ``None`` when no entry qualified
    (``theta_max`` is then ``inf``).
    """

    result: int | None
    theta_max: float
    candidates: np.ndarray


@numba.njit(cache=True)
def _matvec_restricted(indptr, indices, data, x, flags, y):
    n = len(indptr) - 1
    for i in range(n):
        if flags[i]:
            s = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                s += data[k] * x[indices[k]]
            y[i] = s
        else:
            y[i] = 0.0


@numba.njit(cache=True)
def _matvec_rows(indptr, indices, data, n, x_idx, x_val):
    acc = np.zeros(n)
    touched = np.zeros(n, dtype=np.bool_)
    out_idx = np.empty(n, dtype=np.int64)
    cnt = 0
    for k in range(len(x_idx)):
        j = x_idx[k]
        p = x_val[k]
        for t in range(indptr[j], indptr[j + 1]):
            i = indices[t]
            if not touched[i]:
                touched[i] = True
                out_idx[cnt] = i
                cnt += 1
            acc[i] += p * data[t]
    idx = out_idx[:cnt].copy()
    val = np.empty(cnt)
    for k in range(cnt):
        val[k] = acc[idx[k]]
    return idx, val


@numba.njit(cache=True)
def _ratio_dense(d, alpha, state, eps_p, eps_d):
    n = len(alpha)
    cand = np.empty(n, dtype=np.int64)
    nc = 0
    theta = np.inf
    for i in range(n):
        a = alpha[i]
        if state[i] == 0 and a > eps_p:
            cand[nc] = i
            nc += 1
            r = (d[i] + eps_d) / a
            if r < theta:
                theta = r
    amax = 0.0
    result = -1
    for k in range(nc):
        i = cand[k]
        a = alpha[i]
        if d[i] / a <= theta and a > amax:
            amax = a
            result = i
    return result, theta, cand[:nc].copy()


@numba.njit(cache=True)
def _ratio_sparse(d, a_idx, a_val, state, eps_p, eps_d):
    nnz = len(a_idx)
    cand = np.empty(nnz, dtype=np.int64)
    cval = np.empty(nnz)
    nc = 0
    theta = np.inf
    for k in range(nnz):
        i = a_idx[k]
        a = a_val[k]
        if state[i] == 0 and a > eps_p:
            cand[nc] = i
            cval[nc] = a
            nc += 1
            r = (d[i] + eps_d) / a
            if r < theta:
                theta = r
    amax = 0.0
    result = -1
    for k in range(nc):
        i = cand[k]
        a = cval[k]
        if d[i] / a <= theta and a > amax:
            amax = a
            result = i
    return result, theta, cand[:nc].copy()


@numba.njit(cache=True)
def _axpy_dense(a, x, y, eps):
    n = len(y)
    flagged = np.empty(n, dtype=np.int64)
    cnt = 0
    for j in range(n):
        v = y[j] + a * x[j]
        y[j] = v
        if v < -eps:
            flagged[cnt] = j
            cnt += 1
    return flagged[:cnt].copy()


@numba.njit(cache=True)
def _axpy_sparse(a, x_idx, x_val, y, eps):
    nnz = len(x_idx)
    flagged = np.empty(nnz, dtype=np.int64)
    cnt = 0
    for k in range(nnz):
        j = x_idx[k]
        v = y[j] + a * x_val[k]
        y[j] = v
        if v < -eps:
            flagged[cnt] = j
            cnt += 1
    return flagged[:cnt].copy()


def _dense(x, n, what):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) != n:
        raise ValueError(f"{what} has length {len(x)}, expected {n}")
    return x


def restricted_transpose_matvec_dense(A: CSCMatrix, x, flags, out=None) -> np.ndarray:
    """``y = A_N^T x`` for a column-stored ``A`` and dense ``x``.

    ``flags`` selects the columns; unselected entries of the length-``n``
    result are zero.
    """
    x = _dense(x, A.m, "x")
    flags = np.ascontiguousarray(flags, dtype=np.bool_)
    if len(flags) != A.n:
        raise ValueError(f"flags has length {len(flags)}, expected {A.n}")
    y = np.empty(A.n) if out is None else out
    _matvec_restricted(A.indptr, A.indices, A.data, x, flags, y)
    return y


def transpose_matvec_sparse(A: CSRMatrix, x: SparseVector) -> SparseVector:
    """``A^T x`` as a combination of the rows of ``A`` selected by ``x``.

    Result entries appear in first-touch order. Entries that cancel to
    zero stay in the structure.
    """
    if x.n != A.m:
        raise ValueError(f"x has length {x.n}, expected {A.m}")
    idx, val = _matvec_rows(A.indptr, A.indices, A.data, A.n, x.indices, x.values)
    return SparseVector(A.n, idx, val)


def _check_tol(**tols):
    for name, v in tols.items():
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")


def ratio_test(d, alpha, state, eps_p: float, eps_d: float) -> RatioTestResult:
    """Two-pass stabilised minimum ratio test.

    The first pass finds the relaxed bound ``min (d_i + eps_d) / alpha_i``
    over candidates (state lower and ``alpha_i > eps_p``). The second pass
    picks, among candidates whose exact ratio is within that bound, the
    one with the largest ``alpha_i``; the first one seen wins ties.
    A :class:`SparseVector` ``alpha`` is scanned in stored order.
    """
    _check_tol(eps_p=eps_p, eps_d=eps_d)
    d = np.ascontiguousarray(d, dtype=np.float64)
    state = np.ascontiguousarray(state, dtype=np.uint8)
    n = len(d)
    if len(state) != n:
        raise ValueError(f"state has length {len(state)}, expected {n}")
    if isinstance(alpha, SparseVector):
        if alpha.n != n:
            raise ValueError(f"alpha has length {alpha.n}, expected {n}")
        res, theta, cand = _ratio_sparse(
            d, alpha.indices, alpha.values, state, float(eps_p), float(eps_d)
        )
    else:
        alpha = _dense(alpha, n, "alpha")
        res, theta, cand = _ratio_dense(d, alpha, state, float(eps_p), float(eps_d))
    return RatioTestResult(None if res < 0 else int(res), float(theta), cand)


def axpy_checked(a: float, x, y: np.ndarray, eps: float) -> np.ndarray:
    """In-place ``y += a*x``; return indices of updated entries below ``-eps``.

    With a dense ``x`` every entry of ``y`` counts as updated. With a
    :class:`SparseVector` only the stored positions do. Indices are
    returned in update order.
    """
    _check_tol(eps=eps)
    if not isinstance(y, np.ndarray) or y.dtype != np.float64 or not y.flags.c_contiguous:
        raise TypeError("y must be a contiguous float64 ndarray (updated in place)")
    if isinstance(x, SparseVector):
        if x.n != len(y):
            raise ValueError(f"x has length {x.n}, expected {len(y)}")
        return _axpy_sparse(float(a), x.indices, x.values, y, float(eps))
    x = _dense(x, len(y), "x")
    return _axpy_dense(float(a), x, y, float(eps))


def naive_min_ratio(d, alpha) -> int | None:
    """Textbook ``argmin_{alpha_i > 0} d_i / alpha_i`` (first index wins ties)."""
    best = None
    best_ratio = math.inf
    for i, (di, ai) in enumerate(zip(d, alpha)):
        if ai > 0 and di / ai < best_ratio:
            best_ratio = di / ai
            best = i
    return best

"""Small dense two-phase primal simplex with Bland's rule.

Meant for desk-sized linear programs (the cutting-plane master problem,
extensive forms of toy stochastic programs). Bland's rule makes the
pivot sequence, and therefore the returned vertex, deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["LPResult", "LPError", "InfeasibleError", "UnboundedError", "solve_lp"]

_TOL = 1e-9


class LPError(ValueError):
    pass


class InfeasibleError(LPError):
    pass


class UnboundedError(LPError):
    pass


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    fun: float
    iterations: int


def _pivot(T, r, c):
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _simplex(T, basis, ncols, max_iter):
    """Minimise the objective in the last row of ``T`` over columns ``< ncols``."""
    m = T.shape[0] - 1
    it = 0
    while True:
        cost = T[-1, :ncols]
        enter = -1
        for j in range(ncols):
            if cost[j] < -_TOL:
                enter = j
                break
        if enter < 0:
            return it
        colv = T[:m, enter]
        best = math.inf
        leave = -1
        for i in range(m):
            if colv[i] > _TOL:
                ratio = T[i, -1] / colv[i]
                if ratio < best - _TOL or (
                    abs(ratio - best) <= _TOL and basis[i] < basis[leave]
                ):
                    best = ratio
                    leave = i
        if leave < 0:
            raise UnboundedError("objective is unbounded below")
        _pivot(T, leave, enter)
        basis[leave] = enter
        it += 1
        if it > max_iter:
            raise LPError("iteration limit reached")


def solve_lp(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    lower=None,
    upper=None,
    max_iter: int = 50_000,
) -> LPResult:
    """Minimise ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x == b_eq``
    and ``lower <= x <= upper`` (infinite bounds allowed; default ``x >= 0``).
    """
    c = np.asarray(c, dtype=np.float64)
    n = len(c)
    lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=np.float64)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=np.float64)
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=np.float64))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=np.float64))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64)
    if np.any(lower > upper):
        raise InfeasibleError("a lower bound exceeds its upper bound")

    # x = shift + S @ w with w >= 0
    cols = []  # (original index, sign)
    shift = np.zeros(n)
    box_rows = []  # (w column, width)
    for j in range(n):
        lo, hi = lower[j], upper[j]
        if np.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                box_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    nw = len(cols)
    S = np.zeros((n, nw))
    for k, (j, s) in enumerate(cols):
        S[j, k] = s

    rows_ub = [A_ub @ S] if len(A_ub) else []
    rhs_ub = [b_ub - A_ub @ shift] if len(A_ub) else []
    if box_rows:
        B = np.zeros((len(box_rows), nw))
        for r, (k, _) in enumerate(box_rows):
            B[r, k] = 1.0
        rows_ub.append(B)
        rhs_ub.append(np.array([w for _, w in box_rows]))
    G = np.vstack(rows_ub) if rows_ub else np.zeros((0, nw))
    h = np.concatenate(rhs_ub) if rhs_ub else np.zeros(0)
    E = A_eq @ S if len(A_eq) else np.zeros((0, nw))
    f = b_eq - A_eq @ shift if len(A_eq) else np.zeros(0)

    mu, me = len(G), len(E)
    m = mu + me
    nslack = mu
    ncols = nw + nslack
    A = np.zeros((m, ncols))
    A[:mu, :nw] = G
    A[:mu, nw:] = np.eye(mu)
    A[mu:, :nw] = E
    b = np.concatenate([h, f])
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # phase 1: one artificial per row
    T = np.zeros((m + 1, ncols + m + 1))
    T[:m, :ncols] = A
    T[:m, ncols : ncols + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :ncols] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(ncols, ncols + m))
    it = _simplex(T, basis, ncols + m, max_iter)
    if -T[-1, -1] > 1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
        raise InfeasibleError("linear program is infeasible")

    # drive remaining artificials out of the basis, dropping redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= ncols:
            row = T[i, :ncols]
            nz = np.flatnonzero(np.abs(row) > _TOL)
            if len(nz):
                _pivot(T, i, nz[0])
                basis[i] = int(nz[0])
                keep.append(i)
        else:
            keep.append(i)
    T2 = np.zeros((len(keep) + 1, ncols + 1))
    T2[:-1, :ncols] = T[keep, :ncols]
    T2[:-1, -1] = T[keep, -1]
    basis = [basis[i] for i in keep]

    cw = np.concatenate([c @ S, np.zeros(nslack)])
    T2[-1, :ncols] = cw
    for i, bj in enumerate(basis):
        if cw[bj] != 0.0:
            T2[-1] -= cw[bj] * T2[i]
    it += _simplex(T2, basis, ncols, max_iter)

    w = np.zeros(ncols)
    for i, bj in enumerate(basis):
        w[bj] = T2[i, -1]
    x = shift + S @ w[:nw]
    return LPResult(x=x, fun=float(c @ x), iterations=it)

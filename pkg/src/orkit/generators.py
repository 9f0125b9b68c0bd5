"""Benchmark instance families.

Two linear families (p-median, a discretised linear-quadratic control
problem with its objective dropped) built with the row-wise model API,
and two nonlinear families (clnlbeam, cont5_1) built as expression trees.

Random data come from numpy's PCG64 bit generator seeded with the
configured 64-bit seed, so instances are reproducible across platforms
and numpy versions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import nlexpr as nl
from .model import AffineExpression, Constraint, Model, ObjectiveSense, RowSense

__all__ = [
    "PMedianConfig",
    "Cont52Config",
    "ClnlbeamConfig",
    "Cont51Config",
    "gen_pmedian",
    "gen_cont5_2",
    "gen_clnlbeam",
    "gen_cont5_1",
    "make_rng",
]

DEFAULT_SEED = 20130917


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for ``seed``; the bit generator is pinned explicitly."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class PMedianConfig:
    L: int
    M: int = 100
    N: int = 100
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if not (1 <= self.M <= self.L) or self.N < 1:
            raise ValueError(f"invalid p-median config: need 1 <= M <= L and N >= 1, got {self}")


@dataclass(frozen=True)
class Cont52Config:
    N: int
    M: int | None = None

    def __post_init__(self):
        if self.M is None:
            object.__setattr__(self, "M", self.N)
        if self.N < 2 or self.M < 2:
            raise ValueError(f"invalid cont5_2 config: need N, M >= 2, got {self}")

    @property
    def dx(self) -> float:
        return 1.0 / self.N

    @property
    def dt(self) -> float:
        return 1.0 / self.M

    @property
    def g(self) -> np.ndarray:
        """Terminal profile ``0.5 * (1 - (j dx)^2)``, j = 0..N (unused once the objective is dropped)."""
        j = np.arange(self.N + 1)
        return 0.5 * (1.0 - (j * self.dx) ** 2)


@dataclass(frozen=True)
class ClnlbeamConfig:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"clnlbeam needs n >= 1, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n


@dataclass(frozen=True)
class Cont51Config:
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"cont5_1 needs n >= 2, got {self.n}")

    @property
    def a(self) -> float:
        return 8.0 * self.n**2 / math.pi**2

    @property
    def c(self) -> float:
        return 2.0 * self.n / math.pi


def gen_pmedian(cfg: PMedianConfig) -> Model:
    """LP relaxation of the p-median facility location model.

    Columns: ``x_i_j`` (customer i served from location j, i-major) then
    ``y_j``. Rows: ``x_i_j <= y_j`` for every pair, one assignment row per
    customer, then the facility-count row.
    """
    L, M, N = cfg.L, cfg.M, cfg.N
    C = make_rng(cfg.seed).uniform(1.0, float(L), size=N).tolist()
    m = Model(sense=ObjectiveSense.MIN)
    # Columns are appended directly: the bounds are known and uniform.
    m.lower = [0.0] * (N * L + L)
    m.upper = [1.0] * (N * L + L)
    m.names = [f"x_{i}_{j}" for i in range(1, N + 1) for j in range(1, L + 1)]
    m.names += [f"y_{j}" for j in range(1, L + 1)]
    ycol = N * L

    obj = AffineExpression(size_hint=N * L)
    add_term = obj.add_term
    for i in range(N):
        ci = C[i]
        base = i * L
        for j in range(L):
            add_term(abs(ci - (j + 1)), base + j)
    m.set_objective(obj)

    rows = m.rows
    LE = RowSense.LE
    for i in range(N):
        base = i * L
        for j in range(L):
            rows.append(Constraint(AffineExpression([base + j, ycol + j], [1.0, -1.0]), LE))
    for i in range(N):
        base = i * L
        e = AffineExpression(list(range(base, base + L)), [1.0] * L, -1.0)
        rows.append(Constraint(e, RowSense.EQ))
    e = AffineExpression(list(range(ycol, ycol + L)), [1.0] * L, -float(M))
    rows.append(Constraint(e, RowSense.EQ))
    return m


def gen_cont5_2(cfg: Cont52Config) -> Model:
    """Discretised heat-equation control constraints with a zero objective.

    Columns: ``y_i_j`` for i = 0..M, j = 0..N (i-major), then ``u_i`` for
    i = 1..M. Rows: the PDE stencil for i = 0..M-1, j = 1..N-1, then the
    left boundary rows, then the right boundary rows. Terms on both sides
    of the stencil equation are appended separately, so ``y_i_j`` appears
    twice in each stencil row until the model is written or converted.
    """
    N, M = cfg.N, cfg.M
    dx, dt = cfg.dx, cfg.dt
    m = Model(sense=ObjectiveSense.MIN)

    def y(i, j):
        return i * (N + 1) + j

    for i in range(M + 1):
        for j in range(N + 1):
            if i == 0:
                m.add_variable(0.0, 0.0, f"y_{i}_{j}")
            else:
                m.add_variable(0.0, 1.0, f"y_{i}_{j}")
    ucol = (M + 1) * (N + 1)
    for i in range(1, M + 1):
        m.add_variable(-1.0, 1.0, f"u_{i}")

    inv_dt = 1.0 / dt
    k = 1.0 / (2.0 * dx * dx)
    for i in range(M):
        for j in range(1, N):
            e = AffineExpression(size_hint=8)
            e.add_term(inv_dt, y(i + 1, j))
            e.add_term(-inv_dt, y(i, j))
            e.add_term(-k, y(i, j - 1))
            e.add_term(2.0 * k, y(i, j))
            e.add_term(-k, y(i, j + 1))
            e.add_term(-k, y(i + 1, j - 1))
            e.add_term(2.0 * k, y(i + 1, j))
            e.add_term(-k, y(i + 1, j + 1))
            m.add_constraint(e, RowSense.EQ)
    for i in range(1, M + 1):
        e = AffineExpression([y(i, 2), y(i, 1), y(i, 0)], [1.0, -4.0, 3.0])
        m.add_constraint(e, RowSense.EQ)
    two_dx = 2.0 * dx
    for i in range(1, M + 1):
        e = AffineExpression(
            [y(i, N - 2), y(i, N - 1), y(i, N), ucol + i - 1, y(i, N)],
            [1.0, -4.0, 3.0, -two_dx, two_dx],
        )
        m.add_constraint(e, RowSense.EQ)
    return m


def gen_clnlbeam(cfg: ClnlbeamConfig) -> nl.NonlinearModel:
    """Columns ``t``, ``x``, ``u`` (each n+1 long); 2n equality rows."""
    n = cfg.n
    m = nl.NonlinearModel()
    t = [m.add_variable(-1.0, 1.0, f"t_{i}") for i in range(1, n + 2)]
    x = [m.add_variable(-0.05, 0.05, f"x_{i}") for i in range(1, n + 2)]
    u = [m.add_variable(name=f"u_{i}") for i in range(1, n + 2)]
    half_h = nl.Const(0.5 * cfg.h)
    Sum, Neg, Prod, Sin = nl.Sum, nl.Neg, nl.Prod, nl.Sin
    for i in range(n):
        root = Sum(
            (
                x[i + 1],
                Neg(x[i]),
                Neg(Prod((half_h, Sum((Sin(t[i + 1]), Sin(t[i])))))),
            )
        )
        m.add_constraint(root, RowSense.EQ)
    for i in range(n):
        root = Sum(
            (
                t[i + 1],
                Neg(t[i]),
                Neg(Prod((half_h, u[i + 1]))),
                Neg(Prod((half_h, u[i]))),
            )
        )
        m.add_constraint(root, RowSense.EQ)
    return m


def gen_cont5_1(cfg: Cont51Config) -> nl.NonlinearModel:
    """Columns ``y_i_j`` (i, j = 1..n+1, i-major) then ``u_i``; n(n+1) rows.

    The interior stencil uses columns j, j+1, j+2 on rows i and i+1.
    """
    n = cfg.n
    m = nl.NonlinearModel()
    Y = [[m.add_variable(name=f"y_{i}_{j}") for j in range(1, n + 2)] for i in range(1, n + 2)]
    U = [m.add_variable(name=f"u_{i}") for i in range(1, n + 1)]

    def y(i, j):  # 1-based grid indices
        return Y[i - 1][j - 1]

    Sum, Neg, Prod, Pow, Const = nl.Sum, nl.Neg, nl.Prod, nl.Pow, nl.Const
    cn, ca, cc = Const(float(n)), Const(cfg.a), Const(cfg.c)
    m2, m4, p3 = Const(-2.0), Const(-4.0), Const(3.0)
    for i in range(1, n + 1):
        for j in range(1, n):
            root = Sum(
                (
                    Prod((cn, Sum((y(i + 1, j + 1), Neg(y(i, j + 1)))))),
                    Neg(
                        Prod(
                            (
                                ca,
                                Sum(
                                    (
                                        y(i, j),
                                        Prod((m2, y(i, j + 1))),
                                        y(i, j + 2),
                                        y(i + 1, j),
                                        Prod((m2, y(i + 1, j + 1))),
                                        y(i + 1, j + 2),
                                    )
                                ),
                            )
                        )
                    ),
                )
            )
            m.add_constraint(root, RowSense.EQ)
    for i in range(1, n + 1):
        root = Sum((y(i + 1, 3), Prod((m4, y(i + 1, 2))), Prod((p3, y(i + 1, 1)))))
        m.add_constraint(root, RowSense.EQ)
    three_halves = Fraction(3, 2)
    for i in range(1, n + 1):
        yl = y(i + 1, n + 1)
        root = Sum(
            (
                Prod((cc, Sum((y(i + 1, n - 1), Prod((m4, y(i + 1, n))), Prod((p3, yl)))))),
                yl,
                Neg(U[i - 1]),
                Prod((yl, Pow(Pow(yl, 2), three_halves))),
            )
        )
        m.add_constraint(root, RowSense.EQ)
    return m

"""Row-wise linear model building.

A model is held as an ordered list of sparse rows while it is being
specified. Each row is an :class:`AffineExpression` made of two parallel
lists (column indices and coefficients) plus a constant term. Right-hand
sides are folded into the constant so every constraint reads ``expr <sense> 0``.
Conversion to compressed column storage happens once, in
:func:`to_column_form`.

Column and row indices are 0-based. Default display names are 1-based
(``x1``, ``c1``) because that is what the file formats show.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from numbers import Real

import numpy as np

from .sparse import CSCMatrix

__all__ = [
    "ModelError",
    "BoundOrderError",
    "StaleReferenceError",
    "FrozenModelError",
    "ObjectiveSense",
    "RowSense",
    "VariableRef",
    "AffineExpression",
    "Constraint",
    "Model",
    "ColumnForm",
    "new_model",
    "add_variable",
    "add_to_expression",
    "add_constraint",
    "set_objective",
    "to_column_form",
]


class ModelError(ValueError):
    """Base class for model-building errors."""


class BoundOrderError(ModelError):
    pass


class StaleReferenceError(ModelError):
    """An expression refers to a column the model never issued."""


class FrozenModelError(ModelError):
    pass


class ObjectiveSense(enum.Enum):
    MIN = "Min"
    MAX = "Max"


class RowSense(enum.Enum):
    LE = "<="
    EQ = "=="
    GE = ">="


@dataclass(frozen=True)
class VariableRef:
    column: int


class AffineExpression:
    """``sum(coeffs[k] * x[vars[k]]) + constant``.

    Duplicate column indices are kept as appended; they are merged only
    when the model is converted or written.

    Parameters
    ----------
    size_hint : int, optional
        Reserve room for this many terms up front. Appending up to
        ``size_hint`` terms then reuses the reserved slots.
    """

    __slots__ = ("_vars", "_coeffs", "_len", "constant")

    def __init__(self, vars=None, coeffs=None, constant=0.0, size_hint=0):
        if vars is None:
            vars = []
        if coeffs is None:
            coeffs = []
        if len(vars) != len(coeffs):
            raise ValueError("vars and coeffs must have equal length")
        n = len(vars)
        if size_hint > n:
            pad = size_hint - n
            self._vars = list(vars) + [0] * pad
            self._coeffs = [float(c) for c in coeffs] + [0.0] * pad
        else:
            self._vars = list(vars)
            self._coeffs = [float(c) for c in coeffs]
        self._len = n
        self.constant = float(constant)

    @property
    def vars(self) -> list[int]:
        if self._len == len(self._vars):
            return self._vars
        return self._vars[: self._len]

    @property
    def coeffs(self) -> list[float]:
        if self._len == len(self._coeffs):
            return self._coeffs
        return self._coeffs[: self._len]

    @property
    def capacity(self) -> int:
        """Number of term slots currently allocated."""
        return len(self._vars)

    def __len__(self):
        return self._len

    def add_term(self, coeff: float, column: int) -> None:
        n = self._len
        if n < len(self._vars):
            self._vars[n] = column
            self._coeffs[n] = coeff
        else:
            self._vars.append(column)
            self._coeffs.append(coeff)
        self._len = n + 1

    def copy(self) -> "AffineExpression":
        return AffineExpression(self.vars, self.coeffs, self.constant)

    def merged(self) -> tuple[list[int], list[float]]:
        """Sum duplicate columns, keeping first-occurrence order."""
        vars = self.vars
        coeffs = self.coeffs
        if len(set(vars)) == len(vars):
            return list(vars), list(coeffs)
        acc: dict[int, float] = {}
        for v, c in zip(vars, coeffs):
            acc[v] = acc[v] + c if v in acc else c
        return list(acc), list(acc.values())

    def __repr__(self):
        return (
            f"AffineExpression(vars={self.vars!r}, coeffs={self.coeffs!r}, "
            f"constant={self.constant!r})"
        )


def add_to_expression(e: AffineExpression, coeff, x=None) -> AffineExpression:
    """Append ``coeff * x`` to ``e``.

    ``x`` may be a :class:`VariableRef` (appends a term), a number (adds
    ``coeff * x`` to the constant) or omitted (adds ``coeff`` to the
    constant).
    """
    if x is None:
        e.constant += coeff
    elif isinstance(x, VariableRef):
        e.add_term(float(coeff), x.column)
    elif isinstance(x, Real):
        e.constant += coeff * x
    else:
        raise TypeError(f"cannot add {type(x).__name__} to an affine expression")
    return e


@dataclass
class Constraint:
    expr: AffineExpression
    sense: RowSense

    @property
    def rhs(self) -> float:
        return -self.expr.constant


@dataclass
class Model:
    sense: ObjectiveSense = ObjectiveSense.MIN
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    names: list = field(default_factory=list)
    objective: AffineExpression = field(default_factory=AffineExpression)
    rows: list = field(default_factory=list)
    frozen: bool = False

    @property
    def num_vars(self) -> int:
        return len(self.lower)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def _check_mutable(self):
        if self.frozen:
            raise FrozenModelError("model is frozen")

    def _check_columns(self, e: AffineExpression):
        vars = e.vars
        if vars:
            hi = max(vars)
            lo = min(vars)
            if hi >= len(self.lower) or lo < 0:
                bad = hi if hi >= len(self.lower) else lo
                raise StaleReferenceError(
                    f"column {bad} not issued by this model ({len(self.lower)} columns)"
                )

    def add_variable(self, lb=0.0, ub=math.inf, name=None) -> VariableRef:
        self._check_mutable()
        lb = float(lb)
        ub = float(ub)
        if lb > ub:
            raise BoundOrderError(f"lower bound {lb} exceeds upper bound {ub}")
        col = len(self.lower)
        self.lower.append(lb)
        self.upper.append(ub)
        self.names.append(name if name is not None else f"x{col + 1}")
        return VariableRef(col)

    def add_constraint(self, e: AffineExpression, sense: RowSense) -> int:
        self._check_mutable()
        self._check_columns(e)
        self.rows.append(Constraint(e, RowSense(sense)))
        return len(self.rows) - 1

    def set_objective(self, e: AffineExpression) -> None:
        self._check_mutable()
        self._check_columns(e)
        self.objective = e

    def freeze(self) -> "Model":
        self.frozen = True
        return self


def new_model(sense=ObjectiveSense.MIN) -> Model:
    return Model(sense=ObjectiveSense(sense))


def add_variable(m: Model, lb=0.0, ub=math.inf, name=None) -> VariableRef:
    return m.add_variable(lb, ub, name)


def add_constraint(m: Model, e: AffineExpression, sense) -> int:
    return m.add_constraint(e, sense)


def set_objective(m: Model, e: AffineExpression) -> None:
    m.set_objective(e)


@dataclass(frozen=True)
class ColumnForm:
    A: CSCMatrix
    senses: tuple
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    c: np.ndarray
    objective_constant: float
    sense: ObjectiveSense


def to_column_form(m: Model) -> ColumnForm:
    """Convert the row list to compressed sparse columns.

    Duplicate (row, column) entries are summed. Entries inside each column
    are ordered by row index.
    """
    nvars = m.num_vars
    nrows = m.num_rows
    # Bucket terms by column; rows are visited in order so row indices
    # within a bucket come out sorted.
    col_rows: list[list[int]] = [[] for _ in range(nvars)]
    col_vals: list[list[float]] = [[] for _ in range(nvars)]
    for i, con in enumerate(m.rows):
        vars, coeffs = con.expr.merged()
        for v, c in zip(vars, coeffs):
            col_rows[v].append(i)
            col_vals[v].append(c)
    indptr = np.zeros(nvars + 1, dtype=np.int64)
    for j in range(nvars):
        indptr[j + 1] = indptr[j] + len(col_rows[j])
    indices = np.fromiter(
        (r for rows in col_rows for r in rows), dtype=np.int64, count=int(indptr[-1])
    )
    data = np.fromiter(
        (v for vals in col_vals for v in vals), dtype=np.float64, count=int(indptr[-1])
    )
    A = CSCMatrix(nrows, nvars, indptr, indices, data)

    c = np.zeros(nvars)
    obj = m.objective
    for v, coef in zip(obj.vars, obj.coeffs):
        c[v] += coef
    rhs = np.array([-con.expr.constant for con in m.rows], dtype=np.float64)
    return ColumnForm(
        A=A,
        senses=tuple(con.sense for con in m.rows),
        rhs=rhs,
        lower=np.array(m.lower, dtype=np.float64),
        upper=np.array(m.upper, dtype=np.float64),
        c=c,
        objective_constant=obj.constant,
        sense=m.sense,
    )

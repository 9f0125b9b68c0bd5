"""Nonlinear constraint expressions and their sparse Jacobians.

Constraints are trees of :class:`Node` objects whose leaves hold concrete
constants and variable columns. :func:`compile_jacobian` groups the
constraints into equivalence classes (same tree up to a one-to-one
renaming of variables), differentiates one representative per class
symbolically, and lowers each partial derivative to a straight-line tape.
Evaluating the Jacobian replays every tape once per class, vectorised
over the rows of that class.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .model import RowSense

__all__ = [
    "Node",
    "Const",
    "Var",
    "Sum",
    "Neg",
    "Prod",
    "Pow",
    "Sin",
    "Cos",
    "const",
    "var",
    "add",
    "sub",
    "mul",
    "neg",
    "power",
    "sin",
    "cos",
    "UnsupportedOperatorError",
    "DomainError",
    "NonlinearModel",
    "JacobianPlan",
    "differentiate",
    "canonical_key",
    "compile_jacobian",
    "evaluate",
    "evaluate_constraints",
    "evaluate_jacobian",
]


class UnsupportedOperatorError(TypeError):
    pass


class DomainError(ValueError):
    """Fractional power of a negative base."""


# ------------------------------------------------------------------ nodes


class Node:
    __slots__ = ()


class Const(Node):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = float(value)

    def __repr__(self):
        return f"Const({self.value!r})"


class Var(Node):
    __slots__ = ("column",)

    def __init__(self, column: int):
        self.column = column

    def __repr__(self):
        return f"Var({self.column})"


class Sum(Node):
    __slots__ = ("children",)

    def __init__(self, children):
        self.children = tuple(children)

    def __repr__(self):
        return f"Sum{self.children!r}"


class Neg(Node):
    __slots__ = ("child",)

    def __init__(self, child):
        self.child = child

    def __repr__(self):
        return f"Neg({self.child!r})"


class Prod(Node):
    __slots__ = ("children",)

    def __init__(self, children):
        self.children = tuple(children)

    def __repr__(self):
        return f"Prod{self.children!r}"


class Pow(Node):
    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent):
        self.base = base
        self.exponent = Fraction(exponent)

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exponent})"


class Sin(Node):
    __slots__ = ("child",)

    def __init__(self, child):
        self.child = child

    def __repr__(self):
        return f"Sin({self.child!r})"


class Cos(Node):
    __slots__ = ("child",)

    def __init__(self, child):
        self.child = child

    def __repr__(self):
        return f"Cos({self.child!r})"


# Plain builders: no folding, the tree comes out exactly as written.


def const(value) -> Const:
    return Const(value)


def var(column: int) -> Var:
    return Var(column)


def add(*children) -> Sum:
    return Sum(children)


def sub(a, b) -> Sum:
    return Sum((a, Neg(b)))


def mul(*children) -> Prod:
    return Prod(children)


def neg(child) -> Neg:
    return Neg(child)


def power(base, exponent) -> Pow:
    return Pow(base, exponent)


def sin(child) -> Sin:
    return Sin(child)


def cos(child) -> Cos:
    return Cos(child)


# Folding builders used by the differentiator.

_ZERO = Const(0.0)
_ONE = Const(1.0)


def _is_const(node, value=None):
    return type(node) is Const and (value is None or node.value == value)


def _fsum(children):
    terms = []
    acc = 0.0
    has_const = False
    for c in children:
        if type(c) is Const:
            acc += c.value
            has_const = True
        elif type(c) is Sum:
            # flatten nested sums produced by folding
            for cc in c.children:
                if type(cc) is Const:
                    acc += cc.value
                    has_const = True
                else:
                    terms.append(cc)
        else:
            terms.append(c)
    if has_const and acc != 0.0:
        terms.append(Const(acc))
    if not terms:
        return _ZERO
    if len(terms) == 1:
        return terms[0]
    return Sum(terms)


def _fprod(children):
    factors = []
    acc = 1.0
    for c in children:
        if type(c) is Const:
            if c.value == 0.0:
                return _ZERO
            acc *= c.value
        else:
            factors.append(c)
    if not factors:
        return Const(acc)
    if acc != 1.0:
        factors.insert(0, Const(acc))
    if len(factors) == 1:
        return factors[0]
    return Prod(factors)


def _fneg(c):
    if type(c) is Const:
        return Const(-c.value)
    if type(c) is Neg:
        return c.child
    return Neg(c)


def _fpow(base, p: Fraction):
    if p == 0:
        return _ONE
    if p == 1:
        return base
    if type(base) is Const:
        return Const(_pow_value(base.value, p))
    return Pow(base, p)


# ------------------------------------------------------------- evaluation


def _pow_value(b, p: Fraction):
    if p.denominator == 1:
        return b ** int(p)
    if b < 0:
        raise DomainError(f"fractional power {p} of negative base {b}")
    return b ** float(p)


def _pow_array(b, p: Fraction):
    if p.denominator == 1:
        return b ** int(p)
    if np.any(b < 0):
        raise DomainError(f"fractional power {p} of negative base")
    return b ** float(p)


def evaluate(node: Node, x) -> float:
    """Value of the expression at the dense point ``x``."""
    t = type(node)
    if t is Var:
        return float(x[node.column])
    if t is Const:
        return node.value
    if t is Sum:
        s = 0.0
        for c in node.children:
            s += evaluate(c, x)
        return s
    if t is Neg:
        return -evaluate(node.child, x)
    if t is Prod:
        p = 1.0
        for c in node.children:
            p *= evaluate(c, x)
        return p
    if t is Pow:
        return _pow_value(evaluate(node.base, x), node.exponent)
    if t is Sin:
        return math.sin(evaluate(node.child, x))
    if t is Cos:
        return math.cos(evaluate(node.child, x))
    raise UnsupportedOperatorError(f"cannot evaluate {t.__name__}")


# -------------------------------------------------------- differentiation


def differentiate(node: Node, column: int) -> Node:
    """Symbolic partial derivative of ``node`` with respect to ``column``.

    Zeros and ones are folded as the result is assembled and constant
    subexpressions collapse to a single constant.
    """
    t = type(node)
    if t is Const:
        return _ZERO
    if t is Var:
        return _ONE if node.column == column else _ZERO
    if t is Sum:
        return _fsum([differentiate(c, column) for c in node.children])
    if t is Neg:
        return _fneg(differentiate(node.child, column))
    if t is Prod:
        kids = node.children
        terms = []
        for k, c in enumerate(kids):
            dc = differentiate(c, column)
            if _is_const(dc, 0.0):
                continue
            terms.append(_fprod([*kids[:k], dc, *kids[k + 1 :]]))
        return _fsum(terms)
    if t is Pow:
        du = differentiate(node.base, column)
        if _is_const(du, 0.0):
            return _ZERO
        p = node.exponent
        return _fprod([Const(float(p)), _fpow(node.base, p - 1), du])
    if t is Sin:
        du = differentiate(node.child, column)
        if _is_const(du, 0.0):
            return _ZERO
        return _fprod([Cos(node.child), du])
    if t is Cos:
        du = differentiate(node.child, column)
        if _is_const(du, 0.0):
            return _ZERO
        return _fprod([_fneg(Sin(node.child)), du])
    raise UnsupportedOperatorError(f"cannot differentiate {t.__name__}")


# ------------------------------------------------------- canonical keys

_pack = struct.Struct("<d").pack


def canonical_key(node: Node) -> tuple:
    """Structural key of ``node`` with variables renamed by first occurrence.

    Two expressions share a key exactly when they are the same tree with
    bitwise-equal constants and a one-to-one correspondence between their
    variables.
    """
    return _key_and_columns(node)[0]


def _key_and_columns(node: Node):
    slots: dict[int, int] = {}
    out: list = []
    append = out.append

    def walk(nd):
        t = type(nd)
        if t is Var:
            col = nd.column
            s = slots.get(col)
            if s is None:
                s = slots[col] = len(slots)
            append(s)
        elif t is Const:
            append(_pack(nd.value))
        elif t is Sum:
            append("+")
            append(len(nd.children))
            for c in nd.children:
                walk(c)
        elif t is Prod:
            append("*")
            append(len(nd.children))
            for c in nd.children:
                walk(c)
        elif t is Neg:
            append("-")
            walk(nd.child)
        elif t is Sin:
            append("sin")
            walk(nd.child)
        elif t is Cos:
            append("cos")
            walk(nd.child)
        elif t is Pow:
            append("^")
            append(nd.exponent)
            walk(nd.base)
        else:
            raise UnsupportedOperatorError(f"unsupported node {t.__name__}")

    walk(node)
    return tuple(out), list(slots)


# ------------------------------------------------------------------ tapes
#
# A tape is a list of instructions; instruction k writes register k.
#   ("c", value)          constant
#   ("v", slot)           variable slot
#   ("+", (r1, r2, ...))  sum of registers
#   ("*", (r1, r2, ...))  product of registers
#   ("-", r)              negation
#   ("^", r, p)           power with Fraction exponent
#   ("sin", r) / ("cos", r)
# The last register holds the result.


def _lower(node: Node, slot_of: dict[int, int]) -> list[tuple]:
    tape: list[tuple] = []
    memo: dict[int, int] = {}

    def emit(nd) -> int:
        key = id(nd)
        if key in memo:
            return memo[key]
        t = type(nd)
        if t is Const:
            ins = ("c", nd.value)
        elif t is Var:
            ins = ("v", slot_of[nd.column])
        elif t is Sum:
            ins = ("+", tuple(emit(c) for c in nd.children))
        elif t is Prod:
            ins = ("*", tuple(emit(c) for c in nd.children))
        elif t is Neg:
            ins = ("-", emit(nd.child))
        elif t is Pow:
            ins = ("^", emit(nd.base), nd.exponent)
        elif t is Sin:
            ins = ("sin", emit(nd.child))
        elif t is Cos:
            ins = ("cos", emit(nd.child))
        else:
            raise UnsupportedOperatorError(f"unsupported node {t.__name__}")
        tape.append(ins)
        memo[key] = len(tape) - 1
        return memo[key]

    emit(node)
    return tape


def run_tape(tape, slots):
    """Execute ``tape`` with ``slots[s]`` bound to variable slot ``s``.

    Slot values may be scalars or equal-length arrays (one entry per row).
    """
    reg = []
    push = reg.append
    for ins in tape:
        op = ins[0]
        if op == "v":
            push(slots[ins[1]])
        elif op == "c":
            push(ins[1])
        elif op == "+":
            args = ins[1]
            s = reg[args[0]]
            for r in args[1:]:
                s = s + reg[r]
            push(s)
        elif op == "*":
            args = ins[1]
            p = reg[args[0]]
            for r in args[1:]:
                p = p * reg[r]
            push(p)
        elif op == "-":
            push(-reg[ins[1]])
        elif op == "^":
            push(_pow_array(reg[ins[1]], ins[2]))
        elif op == "sin":
            push(np.sin(reg[ins[1]]))
        elif op == "cos":
            push(np.cos(reg[ins[1]]))
        else:  # pragma: no cover - tapes are produced by _lower only
            raise UnsupportedOperatorError(op)
    return reg[-1]


# ------------------------------------------------------------------ model


@dataclass
class NonlinearModel:
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    names: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    senses: list = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self.lower)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def add_variable(self, lb=-math.inf, ub=math.inf, name=None) -> Var:
        lb, ub = float(lb), float(ub)
        if lb > ub:
            raise ValueError(f"lower bound {lb} exceeds upper bound {ub}")
        col = len(self.lower)
        self.lower.append(lb)
        self.upper.append(ub)
        self.names.append(name if name is not None else f"x{col + 1}")
        return Var(col)

    def add_constraint(self, root: Node, sense=RowSense.EQ) -> int:
        """Append ``root <sense> 0``; returns the 0-based row index."""
        self.constraints.append(root)
        self.senses.append(RowSense(sense))
        return len(self.constraints) - 1


def _check_x(x, n):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) != n:
        raise ValueError(f"point has length {len(x)}, expected {n}")
    return x


def evaluate_constraints(m: NonlinearModel, x) -> np.ndarray:
    """Residuals ``g_i(x)`` of every constraint (senses are ignored)."""
    x = _check_x(x, m.num_vars)
    xl = x.tolist()
    return np.array([evaluate(c, xl) for c in m.constraints], dtype=np.float64)


@dataclass
class _ClassPlan:
    rows: np.ndarray  # rows in this class
    columns: np.ndarray  # (len(rows), nslots) slot -> column binding
    tapes: list  # one tape per slot
    offset: np.ndarray  # position of entry (row, slot) in the value array


@dataclass
class JacobianPlan:
    """Row-wise Jacobian structure and per-class derivative tapes.

    ``indptr``/``indices`` give, for row ``i``, the columns
    ``indices[indptr[i]:indptr[i+1]]`` in first-occurrence order.
    """

    num_vars: int
    indptr: np.ndarray
    indices: np.ndarray
    classes: list
    n_differentiations: int

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def to_dense(self, values) -> np.ndarray:
        m = len(self.indptr) - 1
        out = np.zeros((m, self.num_vars))
        rows = np.repeat(np.arange(m), np.diff(self.indptr))
        out[rows, self.indices] = values
        return out


def compile_jacobian(m: NonlinearModel) -> JacobianPlan:
    """Group constraints into equivalence classes and build derivative tapes."""
    groups: dict[tuple, list] = {}
    row_cols: list = []
    for i, root in enumerate(m.constraints):
        key, cols = _key_and_columns(root)
        row_cols.append(cols)
        g = groups.get(key)
        if g is None:
            groups[key] = [i]
        else:
            g.append(i)

    counts = np.fromiter((len(c) for c in row_cols), dtype=np.int64, count=len(row_cols))
    indptr = np.zeros(len(row_cols) + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.fromiter(
        (c for cols in row_cols for c in cols), dtype=np.int64, count=int(indptr[-1])
    )
    if len(indices) and (indices.min() < 0 or indices.max() >= m.num_vars):
        raise ValueError("constraint refers to a column outside the model")

    classes = []
    n_diff = 0
    for rows in groups.values():
        rep = rows[0]
        rep_cols = row_cols[rep]
        slot_of = {c: s for s, c in enumerate(rep_cols)}
        tapes = []
        for c in rep_cols:
            d = differentiate(m.constraints[rep], c)
            n_diff += 1
            tapes.append(_lower(d, slot_of))
        rows_arr = np.asarray(rows, dtype=np.int64)
        nslots = len(rep_cols)
        if nslots:
            columns = indices[indptr[rows_arr][:, None] + np.arange(nslots)]
        else:
            columns = np.zeros((len(rows), 0), dtype=np.int64)
        offset = indptr[rows_arr]
        classes.append(_ClassPlan(rows_arr, columns, tapes, offset))
    return JacobianPlan(m.num_vars, indptr, indices, classes, n_diff)


def evaluate_jacobian(plan: JacobianPlan, x, out=None) -> np.ndarray:
    """Jacobian values aligned with ``plan.indices``."""
    x = _check_x(x, plan.num_vars)
    vals = np.empty(plan.nnz) if out is None else out
    for cp in plan.classes:
        slots = [x[cp.columns[:, s]] for s in range(cp.columns.shape[1])]
        for s, tape in enumerate(cp.tapes):
            v = run_tape(tape, slots)
            vals[cp.offset + s] = v
    return vals

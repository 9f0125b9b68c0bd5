"""Deterministic LP and MPS output, plus a reader for our own LP dialect.

LP layout::

    Minimize | Maximize
     obj: <c1> <name1> + <c2> <name2> ... [+ <constant>]
    Subject To
     c<k>: <coef> <name> + ... <= | = | >= <rhs>
    Bounds
     <one line per column whose bounds differ from [0, +inf)>
    End

The objective line lists every column in issue order, zero coefficients
included, so the file pins the column order and a re-read model lines up
column for column with the original. Constraint terms keep their
first-occurrence order with duplicates summed.

MPS output is free format with one (row, value) pair per COLUMNS line.
Every column starts with its objective entry, which keeps empty columns
visible. Max models carry an ``OBJSENSE MAX`` section.
"""
from __future__ import annotations

import io
import math
import os
import re

from .model import (
    AffineExpression,
    Constraint,
    Model,
    ObjectiveSense,
    RowSense,
    to_column_form,
)

__all__ = ["format_number", "write_lp", "write_mps", "read_lp", "LPParseError"]

_LP_OP = {RowSense.LE: "<=", RowSense.EQ: "=", RowSense.GE: ">="}
_MPS_TYPE = {RowSense.LE: "L", RowSense.EQ: "E", RowSense.GE: "G"}


class LPParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def format_number(v: float, digits: int | None = None) -> str:
    """Shortest text that reads back as the same double.

    Integral values print without a decimal point. ``digits`` caps the
    number of significant digits (the result then no longer round-trips
    in general).
    """
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    s = repr(v)
    if digits is not None and _sig_digits(s) > digits:
        s = format(v, f".{digits}g")
        if float(s).is_integer() and abs(float(s)) < 1e15:
            return str(int(float(s)))
    return s


def _sig_digits(s: str) -> int:
    mant = s.split("e")[0].lstrip("-").replace(".", "").lstrip("0")
    return len(mant)


class _Sink:
    def __init__(self, sink):
        self._own = isinstance(sink, (str, os.PathLike))
        self._f = open(sink, "wb") if self._own else sink
        self._text = isinstance(self._f, io.TextIOBase)
        self.count = 0

    def write(self, s: str):
        b = s.encode("ascii")
        self._f.write(s if self._text else b)
        self.count += len(b)

    def close(self):
        if self._own:
            self._f.close()


def _terms(vars, coeffs, names, fmt) -> list[str]:
    out = []
    for k, (v, c) in enumerate(zip(vars, coeffs)):
        if k == 0:
            out.append(f"{fmt(c)} {names[v]}")
        elif c < 0:
            out.append(f" - {fmt(-c)} {names[v]}")
        else:
            out.append(f" + {fmt(c)} {names[v]}")
    return out


def write_lp(m: Model, sink, digits: int | None = None) -> int:
    """Write ``m`` in LP format to a path or stream; return the byte count."""
    fmt = (lambda v: format_number(v, digits)) if digits else format_number
    names = m.names
    out = _Sink(sink)
    try:
        out.write("Maximize\n" if m.sense is ObjectiveSense.MAX else "Minimize\n")
        c = [0.0] * m.num_vars
        for v, coef in zip(m.objective.vars, m.objective.coeffs):
            c[v] += coef
        parts = _terms(range(m.num_vars), c, names, fmt)
        const = m.objective.constant
        if const != 0:
            if parts:
                parts.append(f" - {fmt(-const)}" if const < 0 else f" + {fmt(const)}")
            else:
                parts.append(fmt(const))
        out.write(" obj: " + "".join(parts) + "\n" if parts else " obj:\n")

        out.write("Subject To\n")
        buf = []
        for i, con in enumerate(m.rows):
            vars, coeffs = con.expr.merged()
            lhs = "".join(_terms(vars, coeffs, names, fmt)) if vars else "0"
            buf.append(f" c{i + 1}: {lhs} {_LP_OP[con.sense]} {fmt(-con.expr.constant)}\n")
            if len(buf) >= 4096:
                out.write("".join(buf))
                buf.clear()
        out.write("".join(buf))

        out.write("Bounds\n")
        buf = []
        for j in range(m.num_vars):
            line = _lp_bound(names[j], m.lower[j], m.upper[j], fmt)
            if line:
                buf.append(line)
        out.write("".join(buf))
        out.write("End\n")
    finally:
        out.close()
    return out.count


def _lp_bound(name, lb, ub, fmt) -> str | None:
    if lb == ub:
        return f" {name} = {fmt(lb)}\n"
    lo_inf = lb == -math.inf
    hi_inf = ub == math.inf
    if lo_inf and hi_inf:
        return f" {name} free\n"
    if hi_inf:
        return None if lb == 0 else f" {name} >= {fmt(lb)}\n"
    lo = "-inf" if lo_inf else fmt(lb)
    return f" {lo} <= {name} <= {fmt(ub)}\n"


def write_mps(m: Model, sink, name: str = "model", digits: int | None = None) -> int:
    """Write ``m`` in free-format MPS to a path or stream; return the byte count."""
    fmt = (lambda v: format_number(v, digits)) if digits else format_number
    cf = to_column_form(m)
    A = cf.A
    names = m.names
    rnames = [f"c{i + 1}" for i in range(m.num_rows)]
    out = _Sink(sink)
    try:
        out.write(f"NAME {name}\n")
        if m.sense is ObjectiveSense.MAX:
            out.write("OBJSENSE\n    MAX\n")
        out.write("ROWS\n N  obj\n")
        out.write("".join(f" {_MPS_TYPE[s]}  {rn}\n" for s, rn in zip(cf.senses, rnames)))

        out.write("COLUMNS\n")
        buf = []
        indptr, indices, data = A.indptr.tolist(), A.indices.tolist(), A.data.tolist()
        c = cf.c.tolist()
        for j in range(A.n):
            nm = names[j]
            buf.append(f" {nm} obj {fmt(c[j])}\n")
            for k in range(indptr[j], indptr[j + 1]):
                buf.append(f" {nm} {rnames[indices[k]]} {fmt(data[k])}\n")
            if len(buf) >= 4096:
                out.write("".join(buf))
                buf.clear()
        out.write("".join(buf))

        out.write("RHS\n")
        if cf.objective_constant != 0:
            out.write(f" RHS obj {fmt(-cf.objective_constant)}\n")
        out.write(
            "".join(
                f" RHS {rn} {fmt(r)}\n" for rn, r in zip(rnames, cf.rhs.tolist()) if r != 0
            )
        )

        out.write("BOUNDS\n")
        buf = []
        for j in range(A.n):
            buf.extend(_mps_bounds(names[j], m.lower[j], m.upper[j], fmt))
        out.write("".join(buf))
        out.write("ENDATA\n")
    finally:
        out.close()
    return out.count


def _mps_bounds(name, lb, ub, fmt) -> list[str]:
    if lb == ub:
        return [f" FX BND {name} {fmt(lb)}\n"]
    lo_inf = lb == -math.inf
    hi_inf = ub == math.inf
    if lo_inf and hi_inf:
        return [f" FR BND {name}\n"]
    lines = []
    if lo_inf:
        lines.append(f" MI BND {name}\n")
    elif lb != 0:
        lines.append(f" LO BND {name} {fmt(lb)}\n")
    if not hi_inf:
        lines.append(f" UP BND {name} {fmt(ub)}\n")
    return lines


# ---------------------------------------------------------------- reading

_NUM = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$|^[+-]?inf$")
_OPS = {"<=": RowSense.LE, "=": RowSense.EQ, ">=": RowSense.GE}


def _is_num(tok: str) -> bool:
    return _NUM.match(tok) is not None


class _LPReader:
    def __init__(self, lines):
        self.lines = lines
        self.model = Model()
        self.index: dict[str, int] = {}

    def col(self, name: str) -> int:
        j = self.index.get(name)
        if j is None:
            j = self.model.add_variable(0.0, math.inf, name).column
            self.index[name] = j
        return j

    def terms(self, toks, lineno) -> AffineExpression:
        e = AffineExpression()
        sign = 1.0
        k = 0
        first = True
        while k < len(toks):
            tok = toks[k]
            if not first:
                if tok not in ("+", "-"):
                    raise LPParseError(lineno, f"expected '+' or '-', got {tok!r}")
                sign = -1.0 if tok == "-" else 1.0
                k += 1
                if k == len(toks):
                    raise LPParseError(lineno, "dangling operator")
                tok = toks[k]
            if not _is_num(tok):
                raise LPParseError(lineno, f"expected a coefficient, got {tok!r}")
            coef = sign * float(tok)
            if k + 1 < len(toks) and toks[k + 1] not in ("+", "-"):
                e.add_term(coef, self.col(toks[k + 1]))
                k += 2
            else:
                e.constant += coef
                k += 1
            first = False
        return e

    def run(self) -> Model:
        lines = self.lines
        if not lines:
            raise LPParseError(1, "empty input")
        head = lines[0].strip()
        if head == "Maximize":
            self.model.sense = ObjectiveSense.MAX
        elif head != "Minimize":
            raise LPParseError(1, f"expected 'Minimize' or 'Maximize', got {head!r}")
        if len(lines) < 2 or not lines[1].strip().startswith("obj:"):
            raise LPParseError(2, "expected objective line ' obj: ...'")
        self.model.objective = self.terms(lines[1].split()[1:], 2)
        if len(lines) < 3 or lines[2].strip() != "Subject To":
            raise LPParseError(3, "expected 'Subject To'")
        ln = 3
        while ln < len(lines) and lines[ln].strip() != "Bounds":
            lineno = ln + 1
            toks = lines[ln].split()
            if len(toks) < 4 or not toks[0].endswith(":"):
                raise LPParseError(lineno, "malformed constraint")
            op = _OPS.get(toks[-2])
            if op is None or not _is_num(toks[-1]):
                raise LPParseError(lineno, "constraint must end with '<op> <rhs>'")
            e = self.terms(toks[1:-2], lineno)
            e.constant = e.constant - float(toks[-1])
            self.model.rows.append(Constraint(e, op))
            ln += 1
        if ln == len(lines):
            raise LPParseError(ln, "missing 'Bounds' section")
        ln += 1
        while ln < len(lines) and lines[ln].strip() != "End":
            self.bound(lines[ln].split(), ln + 1)
            ln += 1
        if ln == len(lines):
            raise LPParseError(ln, "missing 'End'")
        if any(s.strip() for s in lines[ln + 1 :]):
            raise LPParseError(ln + 2, "content after 'End'")
        return self.model

    def bound(self, toks, lineno):
        m = self.model
        try:
            if len(toks) == 2 and toks[1] == "free":
                j = self.col(toks[0])
                m.lower[j], m.upper[j] = -math.inf, math.inf
            elif len(toks) == 3 and toks[1] in ("=", ">=") and _is_num(toks[2]):
                j = self.col(toks[0])
                m.lower[j] = float(toks[2])
                if toks[1] == "=":
                    m.upper[j] = float(toks[2])
            elif (
                len(toks) == 5
                and toks[1] == toks[3] == "<="
                and _is_num(toks[0])
                and _is_num(toks[4])
            ):
                j = self.col(toks[2])
                m.lower[j], m.upper[j] = float(toks[0]), float(toks[4])
            else:
                raise LPParseError(lineno, "malformed bound")
        except ValueError as exc:
            if isinstance(exc, LPParseError):
                raise
            raise LPParseError(lineno, str(exc)) from None


def read_lp(stream) -> Model:
    """Parse LP text written by :func:`write_lp`.

    Accepts a path, a text or binary stream, or the text itself as
    ``str``/``bytes``.
    """
    if isinstance(stream, bytes):
        text = stream.decode("ascii")
    elif isinstance(stream, os.PathLike) or (
        isinstance(stream, str) and "\n" not in stream and os.path.exists(stream)
    ):
        with open(stream, "r", encoding="ascii") as f:
            text = f.read()
    elif isinstance(stream, str):
        text = stream
    else:
        text = stream.read()
        if isinstance(text, bytes):
            text = text.decode("ascii")
    return _LPReader(text.splitlines()).run()

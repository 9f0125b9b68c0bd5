"""Kernel traces, replay and timing reports.

A trace stores the inputs of every kernel call for a sequence of sampled
dual simplex iterations on one constraint matrix. Without a real solver
to record from, iterations are synthesised: a random basis fixes the
nonbasic flags and states, ``x`` is a sparse row of the basis inverse
stand-in, ``alpha = A_N^T x`` is the pivot row, ``d >= 0`` are reduced
costs (strictly positive off the basis) and the step comes from the ratio test.

File layout (text, tab-separated, one record per line)::

    {"format": "orkit-trace/1", "m": ..., "n": ..., ...}
    matrix  <indptr>  <indices>  <data>
    iter    <k>  <x idx>  <x val>  <flags>  <d>  <alpha idx>  <alpha val>  <step>

Lists are comma-separated; floats use round-trip ``repr``. ``flags`` is a
string of ``0``/``1`` characters, one per column, ``1`` meaning nonbasic.
The state vector is derived from it (nonbasic = lower).
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels as K
from .sparse import CSCMatrix, CSRMatrix, SparseVector, csc_to_csr

__all__ = [
    "TRACE_FORMAT",
    "OPERATIONS",
    "TraceError",
    "TraceIteration",
    "KernelTrace",
    "synthetic_matrix",
    "synthesize_trace",
    "write_trace",
    "read_trace",
    "replay",
    "output_digests",
    "time_operations",
    "BenchReport",
    "geometric_mean",
]

TRACE_FORMAT = "orkit-trace/1"
OPERATIONS = (
    "matvec_dense",
    "matvec_sparse",
    "ratio_dense",
    "ratio_sparse",
    "axpy_dense",
    "axpy_sparse",
)
EPS_P = 1e-9
EPS_D = 1e-7
EPS_AXPY = 1e-9


class TraceError(ValueError):
    pass


@dataclass
class TraceIteration:
    x: SparseVector
    flags: np.ndarray  # uint8, 1 = nonbasic
    d: np.ndarray
    alpha: SparseVector
    step: float

    @property
    def state(self) -> np.ndarray:
        # nonbasic columns sit at their lower bound
        return np.where(self.flags == 1, K.LOWER, K.BASIC).astype(np.uint8)


@dataclass
class KernelTrace:
    A: CSCMatrix
    iterations: list
    eps_p: float = EPS_P
    eps_d: float = EPS_D
    eps_axpy: float = EPS_AXPY
    source: str = "synthetic"
    A_csr: CSRMatrix | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.A_csr is None:
            self.A_csr = csc_to_csr(self.A)

    @property
    def m(self) -> int:
        return self.A.m

    @property
    def n(self) -> int:
        return self.A.n


def synthetic_matrix(m: int, n: int, density: float, rng: np.random.Generator) -> CSCMatrix:
    """Random CSC matrix with about ``density * m`` entries per column, at least one."""
    if m < 1 or n < 1 or not 0.0 < density <= 1.0:
        raise ValueError(f"bad synthetic matrix shape or density: m={m} n={n} density={density}")
    per_col = max(1, round(density * m))
    indptr = np.arange(n + 1, dtype=np.int64) * per_col
    indices = np.empty(n * per_col, dtype=np.int64)
    for j in range(n):
        indices[j * per_col : (j + 1) * per_col] = np.sort(rng.choice(m, per_col, replace=False))
    data = rng.uniform(-1.0, 1.0, size=n * per_col)
    return CSCMatrix(m, n, indptr, indices, data).check()


def synthesize_trace(
    A: CSCMatrix,
    iterations: int = 200,
    vector_density: float = 0.05,
    seed: int = 0,
    source: str = "synthetic",
) -> KernelTrace:
    """Sample ``iterations`` kernel inputs on ``A``."""
    if iterations < 1:
        raise ValueError("a trace needs at least one iteration")
    if not 0.0 < vector_density <= 1.0:
        raise ValueError("vector density must lie in (0, 1]")
    rng = np.random.Generator(np.random.PCG64(seed))
    m, n = A.m, A.n
    A_csr = csc_to_csr(A)
    nbasic = min(m, n)
    k_x = max(1, round(vector_density * m))
    its = []
    for _ in range(iterations):
        flags = np.ones(n, dtype=np.uint8)
        flags[rng.choice(n, nbasic, replace=False)] = 0
        xi = rng.choice(m, k_x, replace=False).astype(np.int64)
        x = SparseVector(m, xi, rng.normal(size=k_x))
        alpha = K.transpose_matvec_sparse(A_csr, x)
        d = rng.exponential(1.0, size=n)
        d[flags == 0] = 0.0
        it = TraceIteration(x, flags, d, alpha, 0.0)
        res = K.ratio_test(d, alpha, it.state, EPS_P, EPS_D)
        if res.result is not None:
            it.step = float(d[res.result] / alpha.to_dense()[res.result])
        its.append(it)
    return KernelTrace(A, its, source=source, A_csr=A_csr)


# ------------------------------------------------------------------ I/O


def _ints(a) -> str:
    return ",".join(str(int(v)) for v in a)


def _floats(a) -> str:
    return ",".join(repr(float(v)) for v in a)


def _parse_ints(s: str) -> np.ndarray:
    return np.array([int(v) for v in s.split(",")] if s else [], dtype=np.int64)


def _parse_floats(s: str) -> np.ndarray:
    return np.array([float(v) for v in s.split(",")] if s else [], dtype=np.float64)


def write_trace(trace: KernelTrace, path) -> None:
    header = {
        "format": TRACE_FORMAT,
        "m": trace.m,
        "n": trace.n,
        "iterations": len(trace.iterations),
        "eps_p": trace.eps_p,
        "eps_d": trace.eps_d,
        "eps_axpy": trace.eps_axpy,
        "source": trace.source,
    }
    A = trace.A
    with open(path, "w", newline="\n") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        fh.write("\t".join(("matrix", _ints(A.indptr), _ints(A.indices), _floats(A.data))) + "\n")
        for k, it in enumerate(trace.iterations):
            fields = (
                "iter",
                str(k),
                _ints(it.x.indices),
                _floats(it.x.values),
                "".join("1" if f else "0" for f in it.flags),
                _floats(it.d),
                _ints(it.alpha.indices),
                _floats(it.alpha.values),
                repr(float(it.step)),
            )
            fh.write("\t".join(fields) + "\n")


def read_trace(path) -> KernelTrace:
    with open(path) as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise TraceError(f"trace header is not JSON: {exc}") from exc
        if not isinstance(header, dict) or header.get("format") != TRACE_FORMAT:
            got = header.get("format") if isinstance(header, dict) else None
            raise TraceError(f"unsupported trace format {got!r}, expected {TRACE_FORMAT!r}")
        try:
            m, n = int(header["m"]), int(header["n"])
            tag, p, i, v = fh.readline().rstrip("\n").split("\t")
            if tag != "matrix":
                raise TraceError("second record must be the matrix")
            A = CSCMatrix(m, n, _parse_ints(p), _parse_ints(i), _parse_floats(v)).check()
            its = []
            for lineno, line in enumerate(fh, start=3):
                f = line.rstrip("\n").split("\t")
                if len(f) != 9 or f[0] != "iter":
                    raise TraceError(f"line {lineno}: malformed iteration record")
                flags = np.frombuffer(f[4].encode(), dtype=np.uint8) - ord("0")
                if len(flags) != n:
                    raise TraceError(f"line {lineno}: flag string has the wrong length")
                its.append(
                    TraceIteration(
                        SparseVector(m, _parse_ints(f[2]), _parse_floats(f[3])),
                        flags.astype(np.uint8),
                        _parse_floats(f[5]),
                        SparseVector(n, _parse_ints(f[6]), _parse_floats(f[7])),
                        float(f[8]),
                    )
                )
        except (KeyError, ValueError) as exc:
            if isinstance(exc, TraceError):
                raise
            raise TraceError(f"malformed trace: {exc}") from exc
    if len(its) != int(header.get("iterations", len(its))):
        raise TraceError("iteration count differs from the header")
    return KernelTrace(
        A,
        its,
        eps_p=float(header.get("eps_p", EPS_P)),
        eps_d=float(header.get("eps_d", EPS_D)),
        eps_axpy=float(header.get("eps_axpy", EPS_AXPY)),
        source=str(header.get("source", "")),
    )


# --------------------------------------------------------------- replay


@dataclass
class _Prepared:
    x_dense: list
    alpha_dense: list
    states: list


def _prepare(trace: KernelTrace) -> _Prepared:
    its = trace.iterations
    return _Prepared(
        [it.x.to_dense() for it in its],
        [it.alpha.to_dense() for it in its],
        [it.state for it in its],
    )


def _operation(name: str, trace: KernelTrace, prep: _Prepared) -> Callable[[int, np.ndarray | None], object]:
    A, A_csr, its = trace.A, trace.A_csr, trace.iterations
    ep, ed, ea = trace.eps_p, trace.eps_d, trace.eps_axpy
    if name == "matvec_dense":
        return lambda k, buf: K.restricted_transpose_matvec_dense(A, prep.x_dense[k], its[k].flags, out=buf)
    if name == "matvec_sparse":
        return lambda k, buf: K.transpose_matvec_sparse(A_csr, its[k].x)
    if name == "ratio_dense":
        return lambda k, buf: K.ratio_test(its[k].d, prep.alpha_dense[k], prep.states[k], ep, ed)
    if name == "ratio_sparse":
        return lambda k, buf: K.ratio_test(its[k].d, its[k].alpha, prep.states[k], ep, ed)
    if name == "axpy_dense":
        return lambda k, buf: K.axpy_checked(-its[k].step, prep.alpha_dense[k], buf, ea)
    if name == "axpy_sparse":
        return lambda k, buf: K.axpy_checked(-its[k].step, its[k].alpha, buf, ea)
    raise ValueError(f"unknown operation {name!r}")


def _buffers(name, trace):
    if name == "matvec_dense":
        return [np.empty(trace.n) for _ in trace.iterations]
    if name.startswith("axpy"):
        return [it.d.copy() for it in trace.iterations]
    return [None] * len(trace.iterations)


def replay(trace: KernelTrace) -> dict:
    """Run every operation over the trace once and collect the outputs."""
    prep = _prepare(trace)
    out = {}
    for name in OPERATIONS:
        fn = _operation(name, trace, prep)
        bufs = _buffers(name, trace)
        results = []
        for k in range(len(trace.iterations)):
            r = fn(k, bufs[k])
            results.append((r, bufs[k]) if name.startswith("axpy") else r)
        out[name] = results
    return out


def _feed(h, obj):
    if isinstance(obj, np.ndarray):
        h.update(str(obj.dtype).encode())
        h.update(np.ascontiguousarray(obj).tobytes())
    elif isinstance(obj, SparseVector):
        _feed(h, obj.indices)
        _feed(h, obj.values)
    elif isinstance(obj, K.RatioTestResult):
        h.update(repr((obj.result, float(obj.theta_max))).encode())
        _feed(h, np.asarray(obj.candidates, dtype=np.int64))
    elif isinstance(obj, tuple):
        for o in obj:
            _feed(h, o)
    else:
        raise TypeError(f"cannot digest {type(obj).__name__}")


def output_digests(outputs: dict) -> dict:
    """SHA-256 of each operation's outputs, bitwise over values."""
    digests = {}
    for name in OPERATIONS:
        h = hashlib.sha256()
        for r in outputs[name]:
            _feed(h, r)
        digests[name] = h.hexdigest()
    return digests


# --------------------------------------------------------------- timing


def time_operations(trace: KernelTrace, reps: int = 3, clock: Callable[[], float] = time.perf_counter) -> dict:
    """Per-iteration average seconds of each operation, minimum over ``reps``.

    One untimed warm-up pass runs first so compilation is excluded.
    Input buffers for the in-place operations are reset outside the
    timed region.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    prep = _prepare(trace)
    n_it = len(trace.iterations)
    times = {}
    for name in OPERATIONS:
        fn = _operation(name, trace, prep)
        bufs = _buffers(name, trace)
        for k in range(n_it):  # warm-up
            fn(k, bufs[k])
        best = math.inf
        for _ in range(reps):
            bufs = _buffers(name, trace)
            t0 = clock()
            for k in range(n_it):
                fn(k, bufs[k])
            best = min(best, (clock() - t0) / n_it)
        times[name] = best
    return times


def geometric_mean(values) -> float:
    values = list(values)
    if not values or any(v <= 0 for v in values):
        raise ValueError("geometric mean needs positive values")
    return math.exp(sum(math.log(v) for v in values) / len(values))


@dataclass
class BenchReport:
    """Per-instance times (seconds) of each operation plus the geometric mean."""

    instances: list
    times: dict  # operation -> list of seconds, aligned with instances
    reps: int
    unit: str = "us"

    @property
    def operations(self) -> list:
        return list(self.times)

    def geomean(self, op: str) -> float:
        return geometric_mean(self.times[op])

    def to_tsv(self) -> str:
        scale = {"s": 1.0, "ms": 1e3, "us": 1e6}[self.unit]
        lines = ["\t".join(["operation", "unit", "reps", *self.instances, "geomean"])]
        for op, vals in self.times.items():
            cells = [f"{v * scale:.3f}" for v in vals]
            lines.append("\t".join([op, self.unit, str(self.reps), *cells, f"{self.geomean(op) * scale:.3f}"]))
        return "\n".join(lines) + "\n"

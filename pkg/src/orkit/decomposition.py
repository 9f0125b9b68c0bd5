"""Cutting-plane minimisation of a sum of convex functions.

Each component ``f_j`` is reached only through an oracle returning
``(f_j(x), g)`` with ``g`` a subgradient. Every evaluation adds an affine
minorant (a cut) to that component's model function. The master problem
minimises the sum of model functions over a box, optionally intersected
with a fixed trust region around the incumbent.

:func:`sync_solve` evaluates all components at each iterate before
resolving the master. :func:`async_solve` resolves as soon as a fraction
``alpha`` of the newest iterate's evaluations are back, using whatever
cuts exist at that moment.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .lp import LPError, solve_lp
from .taskpool import TaskError, WorkerPool, parallel_map, run_task_pool

__all__ = [
    "Cut",
    "ModelFunction",
    "MasterConfig",
    "Subproblem",
    "DecompositionResult",
    "OracleError",
    "UndefinedModelError",
    "MasterConfigError",
    "model_value",
    "solve_master",
    "sync_solve",
    "async_solve",
    "piecewise_linear_oracle",
    "load_problem",
]


class OracleError(RuntimeError):
    def __init__(self, component: int, exc: BaseException):
        super().__init__(f"oracle for component {component} failed: {exc!r}")
        self.component = component
        self.__cause__ = exc


class UndefinedModelError(ValueError):
    """A model function without cuts has no value."""


class MasterConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Cut:
    point: np.ndarray
    value: float
    subgradient: np.ndarray

    def __call__(self, x) -> float:
        return self.value + float(self.subgradient @ (np.asarray(x, dtype=np.float64) - self.point))


@dataclass
class ModelFunction:
    component: int
    cuts: list = field(default_factory=list)

    def add_cut(self, point, value, subgradient) -> Cut:
        cut = Cut(
            np.array(point, dtype=np.float64),
            float(value),
            np.array(subgradient, dtype=np.float64).reshape(-1),
        )
        self.cuts.append(cut)
        return cut

    def __call__(self, x) -> float:
        return model_value(self, x)


def model_value(mf: ModelFunction, x) -> float:
    """Pointwise maximum of the cuts of ``mf`` at ``x``."""
    if not mf.cuts:
        raise UndefinedModelError(f"model function {mf.component} has no cuts")
    x = np.asarray(x, dtype=np.float64)
    return max(cut(x) for cut in mf.cuts)


@dataclass
class MasterConfig:
    """Box, stopping rule and asynchrony settings.

    ``trust_radius`` adds the box ``|x - incumbent| <= radius`` to the
    master problem. The radius never changes. ``dedicated_master`` only
    changes timing in simulated pools: when set, master solves overlap
    with dispatching instead of stalling the controller.
    """

    lower: Sequence[float]
    upper: Sequence[float]
    tol: float = 1e-6
    alpha: float = 1.0
    trust_radius: float | None = None
    x0: Sequence[float] | None = None
    max_iter: int = 500
    dedicated_master: bool = False

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=np.float64).reshape(-1)
        self.upper = np.asarray(self.upper, dtype=np.float64).reshape(-1)
        if self.lower.shape != self.upper.shape:
            raise MasterConfigError("lower and upper bounds differ in length")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise MasterConfigError("the master box must be finite")
        if np.any(self.lower > self.upper):
            raise MasterConfigError("empty box")
        if not 0.0 < self.alpha <= 1.0:
            raise MasterConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.tol <= 0:
            raise MasterConfigError("tol must be positive")
        if self.trust_radius is not None and self.trust_radius < 0:
            raise MasterConfigError("trust radius must be nonnegative")
        if self.x0 is None:
            self.x0 = 0.5 * (self.lower + self.upper)
        else:
            self.x0 = np.asarray(self.x0, dtype=np.float64).reshape(-1)
            if self.x0.shape != self.lower.shape:
                raise MasterConfigError("x0 has the wrong length")
            if np.any(self.x0 < self.lower) or np.any(self.x0 > self.upper):
                raise MasterConfigError("x0 lies outside the box")

    @property
    def dim(self) -> int:
        return len(self.lower)


def solve_master(
    models: Sequence[ModelFunction],
    lower,
    upper,
    trust_radius: float | None = None,
    center=None,
    lp_solver: Callable = solve_lp,
) -> tuple[np.ndarray, float]:
    """Minimise ``sum_j model_j(x)`` over the box as an epigraph LP.

    Variables are ``x`` followed by one ``theta_j`` per model, with a row
    ``g^T x - theta_j <= g^T x_i - f_i`` per cut. Returns the minimiser and
    the optimal value.
    """
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise MasterConfigError("the master box must be finite")
    if trust_radius is not None:
        if center is None:
            raise MasterConfigError("a trust region needs a center")
        center = np.asarray(center, dtype=np.float64)
        lower = np.maximum(lower, center - trust_radius)
        upper = np.minimum(upper, center + trust_radius)
    r = len(lower)
    n = len(models)
    rows = []
    rhs = []
    for j, mf in enumerate(models):
        if not mf.cuts:
            raise UndefinedModelError(f"model function {mf.component} has no cuts")
        for cut in mf.cuts:
            row = np.zeros(r + n)
            row[:r] = cut.subgradient
            row[r + j] = -1.0
            rows.append(row)
            rhs.append(float(cut.subgradient @ cut.point) - cut.value)
    c = np.concatenate([np.zeros(r), np.ones(n)])
    try:
        res = lp_solver(
            c,
            A_ub=np.array(rows),
            b_ub=np.array(rhs),
            lower=np.concatenate([lower, np.full(n, -np.inf)]),
            upper=np.concatenate([upper, np.full(n, np.inf)]),
        )
    except LPError as exc:
        raise MasterConfigError(f"master problem failed: {exc}") from exc
    return res.x[:r], float(res.fun)


@dataclass(frozen=True)
class Subproblem:
    component: int
    x: np.ndarray
    iteration: int

    def __str__(self):
        return f"{self.iteration}:{self.component}"


@dataclass
class DecompositionResult:
    x: np.ndarray
    value: float
    lower_bound: float
    iterations: int
    converged: bool
    iterates: list
    lower_bounds: list
    evaluations: int
    trace: list


def _evaluate(oracles, sp: Subproblem):
    value, g = oracles[sp.component](sp.x)
    return float(value), np.asarray(g, dtype=np.float64).reshape(-1)


def _gap_closed(ub, lb, tol):
    return ub - lb <= tol * (1.0 + abs(ub))


def _master_cost(cfg, pool):
    return 0.0 if cfg.dedicated_master else pool.config.master_latency


def _center(cfg, incumbent):
    return incumbent if cfg.trust_radius is not None else None


def sync_solve(oracles: Sequence[Callable], cfg: MasterConfig, pool: WorkerPool | None = None) -> DecompositionResult:
    """Classic cutting-plane loop; each round's evaluations go through ``pool``."""
    pool = pool if pool is not None else WorkerPool(workers=1)
    n = len(oracles)
    models = [ModelFunction(j) for j in range(n)]
    x = np.array(cfg.x0, dtype=np.float64)
    ub, incumbent = math.inf, x
    lb = -math.inf
    iterates, lbs = [x.copy()], []
    evals = 0
    k = 0
    converged = False
    while True:
        subs = [Subproblem(j, x, k) for j in range(n)]
        results = parallel_map(lambda sp: _evaluate(oracles, sp), subs, pool)
        total = 0.0
        for sp, res in zip(subs, results):
            if isinstance(res, TaskError):
                raise OracleError(sp.component, res.exception)
            models[sp.component].add_cut(x, res[0], res[1])
            total += res[0]
        evals += n
        if total < ub:
            ub, incumbent = total, x
        x, lb = solve_master(models, cfg.lower, cfg.upper, cfg.trust_radius, _center(cfg, incumbent))
        pool.charge(_master_cost(cfg, pool))
        pool.record("master", -1, str(k))
        iterates.append(x.copy())
        lbs.append(lb)
        k += 1
        if _gap_closed(ub, lb, cfg.tol):
            converged = True
            break
        if k >= cfg.max_iter:
            break
    return DecompositionResult(incumbent, ub, lb, k, converged, iterates, lbs, evals, pool.trace)


@dataclass
class _Iterate:
    x: np.ndarray
    threshold: int
    received: int = 0
    total: float = 0.0


@dataclass
class _AsyncState:
    models: list
    iterates: list
    ub: float = math.inf
    incumbent: np.ndarray | None = None
    lb: float = -math.inf
    lbs: list = field(default_factory=list)
    master_solves: int = 0
    evaluations: int = 0
    converged: bool = False
    stopped: bool = False


def async_solve(oracles: Sequence[Callable], cfg: MasterConfig, pool: WorkerPool | None = None) -> DecompositionResult:
    """Asynchronous cutting planes with an ``alpha`` proportion trigger.

    The first iterate waits for every component so that each model
    function holds a cut before the first master solve. Later iterates
    trigger a master solve once ``ceil(alpha * n)`` of their own results
    are in. Results for older iterates still add cuts and can still
    improve the incumbent when they complete.
    """
    pool = pool if pool is not None else WorkerPool(workers=1)
    n = len(oracles)
    x0 = np.array(cfg.x0, dtype=np.float64)
    state = _AsyncState(models=[ModelFunction(j) for j in range(n)], iterates=[_Iterate(x0, n)])
    trigger = max(1, math.ceil(cfg.alpha * n - 1e-12))
    queue = deque(Subproblem(j, x0, 0) for j in range(n))
    master_cost = _master_cost(cfg, pool)

    def process(st: _AsyncState, q, sp: Subproblem, res):
        if st.stopped:
            return
        if isinstance(res, TaskError):
            raise OracleError(sp.component, res.exception)
        value, g = res
        st.models[sp.component].add_cut(sp.x, value, g)
        st.evaluations += 1
        it = st.iterates[sp.iteration]
        it.received += 1
        it.total += value
        if it.received == n and it.total < st.ub:
            st.ub, st.incumbent = it.total, it.x
        latest = len(st.iterates) - 1
        if sp.iteration != latest or it.received != it.threshold:
            return
        center = _center(cfg, st.incumbent if st.incumbent is not None else it.x)
        x_new, st.lb = solve_master(st.models, cfg.lower, cfg.upper, cfg.trust_radius, center)
        pool.charge(master_cost)
        pool.record("master", -1, str(latest))
        st.master_solves += 1
        st.lbs.append(st.lb)
        st.iterates.append(_Iterate(x_new, trigger))
        if st.ub < math.inf and _gap_closed(st.ub, st.lb, cfg.tol):
            st.converged = st.stopped = True
            return
        if st.master_solves >= cfg.max_iter:
            st.stopped = True
            return
        k = len(st.iterates) - 1
        q.extend(Subproblem(j, x_new, k) for j in range(n))

    run_task_pool(
        lambda sp: _evaluate(oracles, sp),
        state,
        queue,
        lambda st: st.stopped,
        process,
        pool,
    )
    return DecompositionResult(
        state.incumbent,
        state.ub,
        state.lb,
        state.master_solves,
        state.converged,
        [it.x.copy() for it in state.iterates],
        state.lbs,
        state.evaluations,
        pool.trace,
    )


def piecewise_linear_oracle(pieces):
    """Oracle for ``f(x) = max_k (a_k @ x + b_k)`` given ``[(a_k, b_k), ...]``.

    The subgradient is the slope of the first maximising piece.
    """
    if not pieces:
        raise ValueError("a piecewise-linear function needs at least one piece")
    A = np.array([np.asarray(a, dtype=np.float64).reshape(-1) for a, _ in pieces])
    b = np.array([float(v) for _, v in pieces])

    def oracle(x):
        vals = A @ np.asarray(x, dtype=np.float64) + b
        k = int(np.argmax(vals))
        return float(vals[k]), A[k].copy()

    return oracle


def load_problem(source) -> tuple[list, dict]:
    """Parse a JSON problem description into oracles and box settings.

    Layout::

        {"lower": [...], "upper": [...], "x0": [...],
         "components": [{"pieces": [{"slope": [...], "intercept": b}, ...]}, ...]}

    ``x0`` is optional. Returns ``(oracles, {"lower", "upper", "x0"})``.
    """
    if hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)
    try:
        lower, upper = doc["lower"], doc["upper"]
        comps = doc["components"]
        oracles = []
        for comp in comps:
            pieces = [(pc["slope"], pc["intercept"]) for pc in comp["pieces"]]
            if any(len(a) != len(lower) for a, _ in pieces):
                raise ValueError("slope length differs from the box dimension")
            oracles.append(piecewise_linear_oracle(pieces))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed problem description: {exc!r}") from exc
    if not oracles:
        raise ValueError("problem has no components")
    return oracles, {"lower": lower, "upper": upper, "x0": doc.get("x0")}

"""Dynamic task pools: parallel map and a generic asynchronous driver.

One controller owns the mutable state and the queue. Workers only run
``task_fn(task)``. Results are applied by the controller one at a time,
so ``process_result`` never runs concurrently with itself.

Two execution modes share that contract:

``"simulated"``
    A discrete-event clock. Tasks run inline when dispatched, and each
    completes after a latency taken from the pool config. Idle workers
    take the next queued task in worker-id order. Identical configs give
    identical traces.
``"threads"``
    A :class:`concurrent.futures.ThreadPoolExecutor`. The controller blocks
    on the next completion instead of polling.
"""
from __future__ import annotations

import csv
import heapq
import io
import time
from collections import deque
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

__all__ = [
    "WorkerPoolConfig",
    "WorkerPool",
    "TaskError",
    "PoolStalledError",
    "TraceEvent",
    "Metrics",
    "parallel_map",
    "run_task_pool",
    "makespan",
    "compute_metrics",
    "write_trace",
    "read_trace",
]


class PoolStalledError(RuntimeError):
    """Queue empty, nothing in flight, and the state is not terminated."""


@dataclass(frozen=True)
class TaskError:
    """Failure payload delivered in place of a result."""

    exception: BaseException

    def __bool__(self):
        return False


@dataclass(frozen=True)
class TraceEvent:
    kind: str  # "dispatch", "complete" or "master"
    time: float
    worker: int
    task: str = ""


@dataclass
class WorkerPoolConfig:
    workers: int = 1
    mode: str = "simulated"
    latency: float | Callable[[Any], float] = 1.0
    jitter: float = 0.0
    seed: int = 0
    master_latency: float = 0.0

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("a worker pool needs at least one worker")
        if self.mode not in ("simulated", "threads"):
            raise ValueError(f"unknown pool mode {self.mode!r}")
        if not 0.0 <= self.jitter < 1.0:
            raise ValueError("jitter must lie in [0, 1)")


class WorkerPool:
    """Worker pool plus the event trace of everything it ran."""

    def __init__(self, config: WorkerPoolConfig | None = None, **kwargs):
        self.config = config if config is not None else WorkerPoolConfig(**kwargs)
        self.trace: list[TraceEvent] = []
        self._rng = np.random.Generator(np.random.PCG64(self.config.seed))
        self.now = 0.0
        self._t0 = time.perf_counter()

    @property
    def workers(self) -> int:
        return self.config.workers

    @property
    def simulated(self) -> bool:
        return self.config.mode == "simulated"

    def clock(self) -> float:
        return self.now if self.simulated else time.perf_counter() - self._t0

    def latency(self, payload) -> float:
        lat = self.config.latency
        base = lat(payload) if callable(lat) else float(lat)
        if self.config.jitter:
            base *= self._rng.uniform(1.0 - self.config.jitter, 1.0 + self.config.jitter)
        return base

    def record(self, kind: str, worker: int = -1, task: str = ""):
        self.trace.append(TraceEvent(kind, self.clock(), worker, task))

    def charge(self, duration: float):
        """Advance the simulated clock by controller-side serial work."""
        if self.simulated:
            self.now += duration


def _call(task_fn, task):
    try:
        return task_fn(task)
    except Exception as exc:  # delivered to process_result
        return TaskError(exc)


def run_task_pool(
    task_fn: Callable,
    state,
    queue: deque,
    is_terminated: Callable,
    process_result: Callable,
    pool: WorkerPool,
    *,
    payload: Callable = lambda task: task,
    label: Callable = str,
):
    """Drive ``queue`` through ``pool`` until ``is_terminated(state)``.

    Each idle worker pops the next task and runs ``task_fn`` on it. The
    controller then calls ``process_result(state, queue, task, result)``,
    which may push new tasks. A failed task delivers a :class:`TaskError`
    as its result. Once terminated, nothing new is dispatched, but results
    already in flight are still processed. ``payload(task)`` is what the
    latency model sees.
    """
    if pool.simulated:
        _run_simulated(task_fn, state, queue, is_terminated, process_result, pool, payload, label)
    else:
        _run_threads(task_fn, state, queue, is_terminated, process_result, pool, label)
    return state


def _run_simulated(task_fn, state, queue, is_terminated, process_result, pool, payload, label):
    idle = list(range(pool.workers))
    heapq.heapify(idle)
    events: list = []
    seq = 0
    while True:
        done = is_terminated(state)
        while not done and idle and queue:
            w = heapq.heappop(idle)
            task = queue.popleft()
            pool.record("dispatch", w, label(task))
            result = _call(task_fn, task)
            heapq.heappush(events, (pool.now + pool.latency(payload(task)), seq, w, task, result))
            seq += 1
        if not events:
            if done:
                return
            raise PoolStalledError("no queued or running tasks but the state is not terminated")
        t, _, w, task, result = heapq.heappop(events)
        pool.now = max(pool.now, t)
        pool.record("complete", w, label(task))
        heapq.heappush(idle, w)
        process_result(state, queue, task, result)


def _run_threads(task_fn, state, queue, is_terminated, process_result, pool, label):
    with ThreadPoolExecutor(max_workers=pool.workers) as ex:
        running = {}
        idle = list(range(pool.workers))
        seq = 0
        while True:
            done = is_terminated(state)
            while not done and idle and queue:
                w = idle.pop(0)
                task = queue.popleft()
                pool.record("dispatch", w, label(task))
                fut = ex.submit(_call, task_fn, task)
                running[fut] = (seq, w, task)
                seq += 1
            if not running:
                if done:
                    return
                raise PoolStalledError("no queued or running tasks but the state is not terminated")
            finished, _ = wait(running, return_when=FIRST_COMPLETED)
            for fut in sorted(finished, key=lambda f: running[f][0]):
                _, w, task = running.pop(fut)
                pool.record("complete", w, label(task))
                idle.append(w)
                idle.sort()
                process_result(state, queue, task, fut.result())


@dataclass
class _MapState:
    results: list
    remaining: int


def parallel_map(task_fn: Callable, items, pool: WorkerPool) -> list:
    """Apply ``task_fn`` to every item with dynamic allocation.

    Results come back in input order. A failed item holds a
    :class:`TaskError` and the other items are unaffected.
    """
    items = list(items)
    state = _MapState([None] * len(items), len(items))
    if not items:
        return []
    queue = deque(enumerate(items))

    def store(st, q, task, result):
        st.results[task[0]] = result
        st.remaining -= 1

    run_task_pool(
        lambda task: task_fn(task[1]),
        state,
        queue,
        lambda st: st.remaining == 0,
        store,
        pool,
        payload=lambda task: task[1],
        label=lambda task: str(task[0]),
    )
    return state.results


# ---------------------------------------------------------------- metrics


def makespan(trace) -> float:
    """Time from the first dispatch to the last completion."""
    starts = [e.time for e in trace if e.kind == "dispatch"]
    ends = [e.time for e in trace if e.kind == "complete"]
    if not starts or not ends:
        raise ValueError("trace has no completed tasks")
    return max(ends) - min(starts)


@dataclass(frozen=True)
class Metrics:
    speed: float
    efficiency: float | None
    completed: int
    makespan: float


def _speed(trace):
    done = sum(1 for e in trace if e.kind == "complete")
    span = makespan(trace)
    if span <= 0:
        raise ValueError("trace spans zero time")
    return done / span, done, span


def compute_metrics(trace, workers: int, baseline=None, baseline_workers: int | None = None) -> Metrics:
    """Subproblems per unit time, and efficiency against a baseline run.

    Efficiency is per-worker speed relative to the baseline's per-worker
    speed, in percent.
    """
    if not trace:
        raise ValueError("empty trace")
    speed, done, span = _speed(trace)
    eff = None
    if baseline is not None:
        if baseline_workers is None:
            raise ValueError("baseline_workers is required with a baseline trace")
        bspeed, _, _ = _speed(baseline)
        eff = efficiency(speed, workers, bspeed, baseline_workers)
    return Metrics(speed, eff, done, span)


def efficiency(speed, workers, baseline_speed, baseline_workers) -> float:
    return (speed / workers) / (baseline_speed / baseline_workers) * 100.0


_FIELDS = ("kind", "time", "worker", "task")


def write_trace(trace, sink) -> None:
    """Tab-separated records with a header row; times in full precision."""
    w = csv.writer(sink, delimiter="\t", lineterminator="\n")
    w.writerow(_FIELDS)
    for e in trace:
        w.writerow((e.kind, repr(float(e.time)), e.worker, e.task))


def read_trace(source) -> list[TraceEvent]:
    if isinstance(source, str):
        source = io.StringIO(source)
    r = csv.reader(source, delimiter="\t")
    header = next(r, None)
    if tuple(header or ()) != _FIELDS:
        raise ValueError(f"bad trace header {header!r}")
    return [TraceEvent(k, float(t), int(w), task) for k, t, w, task in r]

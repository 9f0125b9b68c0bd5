"""``orkit`` command-line front end.

Exit codes: 0 on success, 2 for usage errors, 1 for runtime failures.
Reports are tab-separated with a header row.
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
import time

import numpy as np

from . import bench, generators as gen, nlexpr as nl
from .decomposition import MasterConfig, async_solve, load_problem, sync_solve
from .model import to_column_form
from .taskpool import WorkerPool, WorkerPoolConfig, compute_metrics
from .writers import write_lp, write_mps

LINEAR = ("pmedian", "cont5_2")
NONLINEAR = ("clnlbeam", "cont5_1")


class UsageError(Exception):
    pass


def resolve_seed(seed: int | None) -> int:
    """Explicit flag, then ``ORKIT_SEED``, then the built-in default."""
    if seed is not None:
        return seed
    env = os.environ.get("ORKIT_SEED")
    if env is None or env == "":
        return gen.DEFAULT_SEED
    try:
        return int(env, 0)
    except ValueError:
        raise UsageError(f"ORKIT_SEED must be an integer, got {env!r}") from None


def _sizes(values, kind=int) -> list:
    out = []
    for v in values or ():
        for part in v.split(","):
            part = part.strip()
            if not part:
                continue
            try:
                out.append(kind(part))
            except ValueError:
                raise UsageError(f"bad size {part!r}") from None
    return out


def _shape(s: str) -> tuple[int, int]:
    m, sep, n = s.lower().partition("x")
    if not sep:
        raise ValueError(s)
    return int(m), int(n)


def _build_linear(family, size, seed, args):
    if family == "pmedian":
        return gen.gen_pmedian(gen.PMedianConfig(L=size, M=args.M, N=args.N, seed=seed))
    return gen.gen_cont5_2(gen.Cont52Config(N=size))


def _build_nonlinear(family, size):
    if family == "clnlbeam":
        return gen.gen_clnlbeam(gen.ClnlbeamConfig(size))
    return gen.gen_cont5_1(gen.Cont51Config(size))


def _config_error(exc):
    return UsageError(str(exc))


def _emit(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_model(m, fmt, path):
    with open(path, "wb") as fh:
        if fmt == "lp":
            write_lp(m, fh)
        else:
            write_mps(m, fh)


# -------------------------------------------------------------- commands


def cmd_generate(args):
    sizes = _sizes(args.size)
    if len(sizes) != 1:
        raise UsageError("generate takes exactly one --size")
    size = sizes[0]
    seed = resolve_seed(args.seed)
    if args.family in NONLINEAR:
        if args.out:
            raise UsageError(f"{args.family} is nonlinear and has no LP/MPS form")
        try:
            m = _build_nonlinear(args.family, size)
        except ValueError as exc:
            raise _config_error(exc)
        plan = nl.compile_jacobian(m)
        print(f"vars={m.num_vars} rows={m.num_constraints} jac_nz={plan.nnz}")
        return 0
    try:
        m = _build_linear(args.family, size, seed, args)
    except ValueError as exc:
        raise _config_error(exc)
    if args.out:
        _write_model(m, args.format, args.out)
    nnz = to_column_form(m).A.nnz
    print(f"vars={m.num_vars} rows={m.num_rows} nnz={nnz}")
    return 0


def cmd_bench_build(args):
    if args.family not in LINEAR:
        raise UsageError("bench-build supports the linear families only")
    sizes = _sizes(args.size) or [1000, 10000]
    seed = resolve_seed(args.seed)
    lines = ["family\tsize\tformat\treps\tseconds"]
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, f"model.{args.format}")
        for size in sizes:
            best = float("inf")
            for _ in range(args.reps):
                t0 = time.perf_counter()
                try:
                    m = _build_linear(args.family, size, seed, args)
                except ValueError as exc:
                    raise _config_error(exc)
                _write_model(m, args.format, path)
                best = min(best, time.perf_counter() - t0)
                del m
            lines.append(f"{args.family}\t{size}\t{args.format}\t{args.reps}\t{best:.3f}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _kernel_traces(args, seed):
    traces = []
    for path in args.traces:
        traces.append((os.path.basename(path), bench.read_trace(path)))
    if args.traces and not args.size:
        return traces
    family = args.family
    if family == "synthetic":
        try:
            shapes = [_shape(s) for s in _sizes(args.size or ["1000x2000"], str)]
        except ValueError:
            raise UsageError("synthetic sizes look like MxN, e.g. 1000x2000") from None
        for k, (m, n) in enumerate(shapes):
            rng = gen.make_rng(seed + k)
            try:
                A = bench.synthetic_matrix(m, n, args.density, rng)
            except ValueError as exc:
                raise _config_error(exc)
            traces.append((f"{m}x{n}", bench.synthesize_trace(A, args.iters, args.vector_density, seed + k)))
    elif family in LINEAR:
        for k, size in enumerate(_sizes(args.size)):
            try:
                A = to_column_form(_build_linear(family, size, seed, args)).A
            except ValueError as exc:
                raise _config_error(exc)
            traces.append(
                (f"{family}{size}", bench.synthesize_trace(A, args.iters, args.vector_density, seed + k, source=family))
            )
    else:
        raise UsageError("bench-kernels families: synthetic, pmedian, cont5_2")
    return traces


def cmd_bench_kernels(args):
    if args.iters < 1 or not 0 < args.vector_density <= 1:
        raise UsageError("--iters must be positive and --vector-density in (0, 1]")
    seed = resolve_seed(args.seed)
    traces = _kernel_traces(args, seed)
    if args.save:
        os.makedirs(args.save, exist_ok=True)
        for name, tr in traces:
            bench.write_trace(tr, os.path.join(args.save, f"{name}.trace"))
    times = {op: [] for op in bench.OPERATIONS}
    for _, tr in traces:
        t = bench.time_operations(tr, args.reps)
        for op in bench.OPERATIONS:
            times[op].append(t[op])
    report = bench.BenchReport([name for name, _ in traces], times, args.reps)
    _emit(report.to_tsv(), args.out)
    return 0


def cmd_jacobian(args):
    if args.family not in NONLINEAR:
        raise UsageError("jacobian supports clnlbeam and cont5_1")
    sizes = _sizes(args.size) or [5000 if args.family == "clnlbeam" else 200]
    seed = resolve_seed(args.seed)
    lines = ["family\tsize\tvars\trows\tjac_nz\tclasses\tdifferentiations\tbuild_s\teval_ms"]
    for size in sizes:
        build = evaluate = float("inf")
        for _ in range(args.reps):
            t0 = time.perf_counter()
            try:
                m = _build_nonlinear(args.family, size)
            except ValueError as exc:
                raise _config_error(exc)
            plan = nl.compile_jacobian(m)
            build = min(build, time.perf_counter() - t0)
            x = _random_point(m, seed)
            out = np.empty(plan.nnz)
            t0 = time.perf_counter()
            nl.evaluate_jacobian(plan, x, out=out)
            evaluate = min(evaluate, time.perf_counter() - t0)
        lines.append(
            f"{args.family}\t{size}\t{m.num_vars}\t{m.num_constraints}\t{plan.nnz}\t"
            f"{plan.num_classes}\t{plan.n_differentiations}\t{build:.3f}\t{evaluate * 1e3:.3f}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _random_point(m, seed):
    lo = np.maximum(np.asarray(m.lower, dtype=np.float64), -1.0)
    hi = np.minimum(np.asarray(m.upper, dtype=np.float64), 1.0)
    return gen.make_rng(seed).uniform(lo, hi)


def cmd_decompose(args):
    if not 0.0 < args.alpha <= 1.0:
        raise UsageError(f"--alpha must lie in (0, 1], got {args.alpha}")
    if args.tol <= 0 or args.workers < 1 or args.baseline_workers < 1:
        raise UsageError("--tol must be positive and worker counts at least 1")
    if args.latency <= 0 or not 0 <= args.jitter < 1:
        raise UsageError("--latency must be positive and --jitter in [0, 1)")
    seed = resolve_seed(args.seed)
    try:
        oracles, box = load_problem(args.problem)
        cfg = MasterConfig(
            box["lower"],
            box["upper"],
            tol=args.tol,
            alpha=args.alpha,
            x0=box["x0"],
            trust_radius=args.trust_radius,
            max_iter=args.max_iter,
        )
    except ValueError as exc:
        raise _config_error(exc)
    solve = sync_solve if args.alpha == 1.0 else async_solve

    def run(workers):
        pool = WorkerPool(
            WorkerPoolConfig(workers=workers, mode=args.mode, latency=args.latency, jitter=args.jitter, seed=seed)
        )
        return solve(oracles, cfg, pool), pool

    res, pool = run(args.workers)
    base, _ = run(args.baseline_workers)
    metrics = compute_metrics(pool.trace, args.workers, base.trace, args.baseline_workers)
    mode = "sync" if solve is sync_solve else "async"
    lines = [
        "algorithm\tworkers\tvalue\tlower_bound\titerations\tevaluations\tspeed\tefficiency\tconverged\tx",
        f"{mode}\t{args.workers}\t{res.value:.6f}\t{res.lower_bound:.6f}\t{res.iterations}\t{res.evaluations}\t"
        f"{metrics.speed:.3f}\t{metrics.efficiency:.1f}\t{str(res.converged).lower()}\t"
        + ",".join(f"{v:.6f}" for v in res.x),
    ]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_replay(args):
    tr = bench.read_trace(args.trace)
    digests = bench.output_digests(bench.replay(tr))
    lines = ["operation\titerations\tsha256"]
    lines += [f"{op}\t{len(tr.iterations)}\t{digests[op]}" for op in bench.OPERATIONS]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orkit", description="Optimization modelling and kernel benchmarks.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, family_choices, family_default=None):
        sp.add_argument("--family", choices=family_choices, default=family_default, required=family_default is None)
        sp.add_argument("--size", action="append", help="size parameter; repeat or comma-separate for several")
        sp.add_argument("--seed", type=int, default=None, help="random seed (default: $ORKIT_SEED or 20130917)")
        sp.add_argument("--out", help="output path")

    g = sub.add_parser("generate", help="build an instance and optionally write it")
    common(g, LINEAR + NONLINEAR)
    g.add_argument("--format", choices=("lp", "mps"), default="lp")
    g.add_argument("--M", type=int, default=100, help="p-median facility count")
    g.add_argument("--N", type=int, default=100, help="p-median customer count")
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("bench-build", help="time model build plus file write")
    common(b, LINEAR, "pmedian")
    b.add_argument("--format", choices=("lp", "mps"), default="lp")
    b.add_argument("--reps", type=int, default=3)
    b.add_argument("--M", type=int, default=100)
    b.add_argument("--N", type=int, default=100)
    b.set_defaults(func=cmd_bench_build)

    k = sub.add_parser("bench-kernels", help="time the six simplex kernels")
    common(k, ("synthetic",) + LINEAR, "synthetic")
    k.add_argument("traces", nargs="*", help="saved trace files to time")
    k.add_argument("--reps", type=int, default=3)
    k.add_argument("--iters", type=int, default=200)
    k.add_argument("--density", type=float, default=0.01, help="synthetic column density")
    k.add_argument("--vector-density", type=float, default=0.05)
    k.add_argument("--save", help="directory to save the generated traces in")
    k.add_argument("--M", type=int, default=100)
    k.add_argument("--N", type=int, default=100)
    k.set_defaults(func=cmd_bench_kernels)

    j = sub.add_parser("jacobian", help="time Jacobian compilation and evaluation")
    common(j, NONLINEAR)
    j.add_argument("--reps", type=int, default=3)
    j.set_defaults(func=cmd_jacobian)

    d = sub.add_parser("decompose", help="cutting-plane run on a JSON problem")
    d.add_argument("problem", help="JSON problem description")
    d.add_argument("--workers", type=int, default=1)
    d.add_argument("--mode", choices=("simulated", "threads"), default="simulated")
    d.add_argument("--alpha", type=float, default=1.0)
    d.add_argument("--tol", type=float, default=1e-6)
    d.add_argument("--seed", type=int, default=None)
    d.add_argument("--latency", type=float, default=1.0, help="simulated seconds per subproblem")
    d.add_argument("--jitter", type=float, default=0.0, help="relative latency jitter in [0, 1)")
    d.add_argument("--baseline-workers", type=int, default=1)
    d.add_argument("--trust-radius", type=float, default=None)
    d.add_argument("--max-iter", type=int, default=500)
    d.add_argument("--out")
    d.set_defaults(func=cmd_decompose)

    r = sub.add_parser("replay", help="replay a trace and print output digests")
    r.add_argument("trace")
    r.add_argument("--out")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "reps", 1) < 1:
        parser.print_usage(sys.stderr)
        print("orkit: error: --reps must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"orkit: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, MemoryError) as exc:
        print(f"orkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

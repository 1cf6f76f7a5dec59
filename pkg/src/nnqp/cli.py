"""Command-line front end: generic solves, super-resolution, labeling, bench.

Conventions shared by every command: stdout carries machine-readable
results only (``key value`` lines or CSV), stderr carries human messages,
and all randomness flows from the single ``--seed`` flag. Exit codes for
``solve`` follow the stop reason (0 converged, 2 stalled, 3 max_iter);
unreadable or malformed inputs exit 1 everywhere.

Matrices and vectors are read from whitespace-delimited text or Matrix
Market files (array and coordinate formats both work; detection is by the
``%%MatrixMarket`` banner). The ``NNQP_THREADS`` environment variable caps
the threads used by the underlying BLAS.
"""

import argparse
import csv
import os
import sys
import time

import numpy as np

from . import io as nio
from .image import RasterImage, read_label_mask, read_pgm, read_ppm, write_pgm, write_ppm
from .labeling import label_solve, labels_to_rgb
from .oracle import active_set_enumerate, projected_gradient
from .quadratic import DEFAULT_DELTA, Quadratic, split
from .solver import SolverConfig, StopReason, solve, write_trace_csv
from .superres import FrameModel, StackedOperator, reconstruct, register_frames
from .synthetic import random_nonneg_problem, random_pd_problem

EXIT_CODES = {
    StopReason.KKT_CONVERGED: 0,
    StopReason.STALLED: 2,
    StopReason.MAX_ITER: 3,
    StopReason.UNDERFLOW: 2,
}

BENCH_SIZES = (10, 50, 100, 500)
BENCH_CONDS = (10.0, 1e3)
BENCH_VARIANTS = ("main", "isra", "sha", "brand_chen")


def _apply_thread_cap():
    cap = os.environ.get("NNQP_THREADS")
    if not cap:
        return
    try:
        limit = max(1, int(cap))
    except ValueError:
        print("ignoring non-integer NNQP_THREADS=%r" % cap, file=sys.stderr)
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limit)
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(limit))


def _solver_config(args):
    return SolverConfig(
        variant=args.variant,
        max_iter=args.max_iter,
        tol_kkt=args.tol_kkt,
        tol_rel_change=args.tol_change,
        delta=args.delta,
        record_trace=True,
    )


def cmd_solve(args):
    if args.least_squares:
        A = nio.load_matrix(args.matrix)
        b = nio.load_vector(args.vector)
        q = Quadratic.from_least_squares(A, b)
    else:
        Q = nio.load_matrix(args.matrix)
        h = nio.load_vector(args.vector)
        q = Quadratic(Q, h)
    s = split(q, delta=args.delta)
    x0 = nio.load_vector(args.start) if args.start else None
    state, reason = solve(s, x0=x0, config=_solver_config(args))

    nio.save_vector(args.output, state.x)
    if args.trace:
        write_trace_csv(state.trace, args.trace)

    from .solver import kkt_report

    rep = kkt_report(q, state.x)
    print("stop_reason %s" % reason.value)
    print("iterations %d" % state.iter)
    print("objective %.17g" % state.objective)
    print("kkt_complementarity %.17g" % rep.complementarity)
    print("kkt_dual_feasibility %.17g" % rep.dual_feasibility)
    print("kkt_primal_feasibility %.17g" % rep.primal_feasibility)
    if state.underflow:
        print("underflow 1")
    return EXIT_CODES[reason]


def cmd_sr(args):
    entries = nio.read_frame_manifest(args.manifest)
    frames = [read_pgm(p).pixels for p, _ in entries]
    r = args.r

    shifts = [shift for _, shift in entries]
    if any(shift is None for shift in shifts):
        if len(frames) < 2:
            raise ValueError("'auto' registration needs at least 2 frames")
        registered = register_frames(frames, r, search_radius=args.search_radius)
        for k, (model, shift) in enumerate(zip(registered, shifts)):
            if shift is None:
                shifts[k] = model.shift
                print(
                    "frame %d registered shift (%.3f, %.3f)" % (k, *model.shift),
                    file=sys.stderr,
                )
    models = [FrameModel(shift=s, decimation_factor=r) for s in shifts]

    hr_shape = (frames[0].shape[0] * r, frames[0].shape[1] * r)
    op = StackedOperator(models, hr_shape)
    x, misfits = reconstruct(
        op, frames, max_iter=args.max_iter, tol_rel_change=args.tol_change,
        delta=args.delta,
    )
    write_pgm(args.output, RasterImage(np.clip(x, 0.0, 1.0)))
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "misfit"])
            for k, m in enumerate(misfits):
                w.writerow(["%d" % k, "%.17g" % m])
    for k, m in enumerate(misfits):
        print("iter %d misfit %.17g" % (k, m))
    return 0


def cmd_label(args):
    image = read_ppm(args.image)
    seeds = read_label_mask(args.seeds, args.classes)
    field, labels, info = label_solve(
        image.pixels, seeds, args.classes, alpha=args.alpha,
        tol=args.tol_change, max_sweeps=args.max_iter, delta=args.delta,
    )
    write_ppm(args.output, labels_to_rgb(labels))
    if args.prob_prefix:
        for k in range(args.classes):
            write_pgm("%s%d.pgm" % (args.prob_prefix, k + 1), np.clip(field.X[k], 0, 1))
    print("sweeps %d" % info["sweeps"])
    print("simplex_violation %.17g" % info["simplex_violation"])
    return 0


def _bench_cell(variant, q, oracle_obj, max_iter, tol_kkt):
    s = split(q)
    cfg = SolverConfig(
        variant=variant, max_iter=max_iter, tol_kkt=tol_kkt,
        tol_rel_change=1e-14, record_trace=True,
    )
    t0 = time.perf_counter()
    state, reason = solve(s, config=cfg)
    elapsed = time.perf_counter() - t0
    objectives = [row[1] for row in state.trace]
    violations = sum(
        1
        for a, b in zip(objectives, objectives[1:])
        if b > a + 1e-12 * (1.0 + abs(a))
    )
    gap = abs(state.objective - oracle_obj) / max(1.0, abs(oracle_obj))
    return {
        "iters": state.iter,
        "time": elapsed,
        "final_kkt": state.kkt_residual,
        "final_obj_gap_vs_oracle": gap,
        "monotone_violations": violations,
        "status": reason.value,
    }


def cmd_bench(args):
    rng = np.random.default_rng(args.seed)
    rows = []
    for n in BENCH_SIZES:
        for cond in BENCH_CONDS:
            general = random_pd_problem(n, cond, rng)
            nonneg = random_nonneg_problem(n, rng)
            oracles = {}
            for tag, q in (("general", general), ("nonneg", nonneg)):
                if n <= 12:
                    oracles[tag] = active_set_enumerate(q).objective
                else:
                    oracles[tag] = projected_gradient(
                        q, np.zeros(n), tol=1e-8, max_iter=20_000
                    ).objective
            for variant in BENCH_VARIANTS:
                q = nonneg if variant == "isra" else general
                oracle_obj = oracles["nonneg" if variant == "isra" else "general"]
                try:
                    cell = _bench_cell(variant, q, oracle_obj, args.max_iter, args.tol_kkt)
                except Exception as exc:  # per-cell failures land in the CSV
                    cell = {
                        "iters": -1, "time": 0.0, "final_kkt": float("nan"),
                        "final_obj_gap_vs_oracle": float("nan"),
                        "monotone_violations": -1, "status": "error:%s" % exc,
                    }
                rows.append((variant, n, cond, cell))

    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow([
            "variant", "n", "cond", "iters", "time", "final_kkt",
            "final_obj_gap_vs_oracle", "monotone_violations", "status",
        ])
        for variant, n, cond, cell in rows:
            elapsed = "%.3f" % cell["time"] if args.timing else "0.000"
            w.writerow([
                variant, "%d" % n, "%g" % cond, "%d" % cell["iters"], elapsed,
                "%.6e" % cell["final_kkt"],
                "%.6e" % cell["final_obj_gap_vs_oracle"],
                "%d" % cell["monotone_violations"], cell["status"],
            ])
    finally:
        if args.output:
            out.close()
    return 0


def _add_solver_flags(p):
    p.add_argument("--variant", choices=["main", "isra", "sha", "brand_chen"],
                   default="main", help="multiplicative update rule")
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--tol-kkt", type=float, default=1e-8,
                   help="stop when all KKT residuals reach this")
    p.add_argument("--tol-change", type=float, default=1e-12,
                   help="relative objective stall tolerance (10-iteration window)")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA,
                   help="stabilizer added to update numerator and denominator")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nnqp",
        description="Multiplicative solvers for nonnegative quadratic programming",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve min 0.5 x'Qx - x'h s.t. x >= 0")
    p.add_argument("matrix", help="Q (or A with --least-squares)")
    p.add_argument("vector", help="h (or b with --least-squares)")
    p.add_argument("--least-squares", action="store_true",
                   help="inputs are A, b; solve min ||Ax-b||^2 s.t. x >= 0")
    p.add_argument("-o", "--output", default="x.txt",
                   help="solution vector, one value per line")
    p.add_argument("--start", help="optional strictly positive start vector")
    p.add_argument("--trace", help="write iteration trace CSV here")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sr", help="multi-frame super-resolution from a manifest")
    p.add_argument("manifest", help="one line per frame: 'path dx dy' or 'path auto'")
    p.add_argument("-o", "--output", default="sr.pgm", help="reconstructed PGM")
    p.add_argument("--r", type=int, default=1, help="decimation factor")
    p.add_argument("--search-radius", type=float, default=2.0,
                   help="registration search radius in high-res pixels")
    p.add_argument("--trace", help="write per-iteration misfit CSV here")
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol-change", type=float, default=1e-10)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.set_defaults(func=cmd_sr)

    p = sub.add_parser("label", help="seed-based MRF color image labeling")
    p.add_argument("image", help="input PPM (P6)")
    p.add_argument("seeds", help="seed mask PGM: 0 unlabeled, v = class v")
    p.add_argument("--classes", type=int, required=True, help="number of classes K")
    p.add_argument("--alpha", type=float, default=1.0, help="smoothness weight")
    p.add_argument("-o", "--output", default="labels.ppm",
                   help="label map PPM with fixed palette")
    p.add_argument("--prob-prefix",
                   help="also write per-class probability PGMs with this prefix")
    p.add_argument("--max-iter", type=int, default=500, help="maximum sweeps")
    p.add_argument("--tol-change", type=float, default=1e-4,
                   help="relative field change to declare convergence")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("bench", help="benchmark the update rules on random problems")
    p.add_argument("-o", "--output", help="CSV destination (default stdout)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for every random draw (default 0)")
    p.add_argument("--timing", action="store_true",
                   help="record wall time per cell (breaks byte-for-byte "
                        "reproducibility of the CSV)")
    p.add_argument("--max-iter", type=int, default=50_000)
    p.add_argument("--tol-kkt", type=float, default=1e-8)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    _apply_thread_cap()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

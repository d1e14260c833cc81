"""Command line: ``sphdesign {partition,solve,verify,bound,faraday,mz}``.

Exit codes: 0 success, 2 invalid usage or malformed input, 3 failed
verification, 4 solver did not converge.  Reports go to stdout as JSON,
logs to stderr.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .designer import DesignerConfig, anchor_configuration, solve_fixed_point, solve_positions
from .harmonics import HarmonicSpace, random_poly
from .io import dumps, load_partition, read_points, save_partition, write_json, write_manifest, write_points
from .partition import build_partition
from .verifier import faraday_potential, lower_bound, mz_check, verify_design, verify_partition

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_NOCONV = 0, 2, 3, 4

log = logging.getLogger("sphdesign")


class UsageError(Exception):
    pass


def _positive(kind):
    def conv(s):
        v = kind(s)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sphdesign", description="Spherical t-designs from convex equal-area partitions.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--threads", type=_positive(int), default=None, help="cap BLAS threads")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("partition", help="build and verify an equal-area convex partition")
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--verify-samples", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("solve", help="solve for a separated t-design")
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--t", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--method", choices=["positions", "fixedpoint"], default="positions")
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--max-iters", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--epsilon", type=float, default=0.1)
    s.add_argument("--delta", type=float, default=0.3)
    s.add_argument("--eta", type=float, default=0.02)
    s.add_argument("--out", type=Path, required=True, help="points CSV; report goes to <out>.report.json")

    s = sub.add_parser("verify", help="check a point set for the design property")
    s.add_argument("--points", type=Path, required=True)
    s.add_argument("--t", type=int, required=True)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--partition", type=Path, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--manifest", type=Path, default=None)

    s = sub.add_parser("bound", help="dimension lower bound on design size")
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--t", type=int, required=True)

    s = sub.add_parser("faraday", help="sup-deviation of the point-charge potential at radius r")
    s.add_argument("--points", type=Path, required=True)
    s.add_argument("--r", type=float, required=True)
    s.add_argument("--probes", type=int, default=4096)
    s.add_argument("--manifest", type=Path, default=None)

    s = sub.add_parser("mz", help="sampling-ratio report for a random polynomial")
    s.add_argument("--partition", type=Path, required=True)
    s.add_argument("--degree", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--eta", type=float, default=0.02)
    s.add_argument("--manifest", type=Path, default=None)
    return p


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.name + suffix)


def _params(args) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
            if k not in ("verbose",)}


def cmd_partition(args) -> tuple[int, dict, list, list]:
    if args.dim < 2 or args.count < 1:
        raise UsageError("need --dim >= 2 and --count >= 1")
    if args.verify_samples < 0:
        raise UsageError("--verify-samples must be >= 0")
    part = build_partition(args.dim, args.count, validate=False, seed=args.seed)
    save_partition(args.out, part)
    outputs = [args.out]
    code = EXIT_OK
    report = {"partition": str(args.out), "N": part.N, "d": part.d,
              "construction": part.construction,
              "lambda": None if part.frame is None else part.frame.lam,
              "mu": None if part.frame is None else part.frame.mu}
    if args.verify_samples:
        rep = verify_partition(part, args.verify_samples, args.seed, convexity_pairs=100)
        report["verification"] = rep.to_dict()
        rpath = _sidecar(args.out, ".report.json")
        write_json(rpath, report)
        outputs.append(rpath)
        code = EXIT_OK if rep.passed else EXIT_VERIFY
    return code, report, [], outputs


def cmd_solve(args):
    if args.dim < 1 or args.n < 1 or args.t < 1 or args.max_iters < 0 or args.tol <= 0:
        raise UsageError("need --dim, --n, --t >= 1, --tol > 0, --max-iters >= 0")
    if args.method == "fixedpoint" and args.dim != 2:
        raise UsageError("--method fixedpoint needs --dim 2")
    try:
        cfg = DesignerConfig(epsilon=args.epsilon, delta=args.delta, eta=args.eta,
                             tol_residual=args.tol, max_iters=args.max_iters, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    space = HarmonicSpace(args.dim, args.t)
    anchored = anchor_configuration(build_partition(args.dim, args.n, validate=False, seed=args.seed))
    if args.method == "positions":
        out, rep = solve_positions(space, anchored, cfg)
    else:
        _, out, rep = solve_fixed_point(space, anchored, cfg)
    rep["method"] = args.method
    write_points(args.out, out.points)
    rpath = _sidecar(args.out, ".report.json")
    write_json(rpath, rep)
    ok = rep["final_residual"] <= args.tol and rep["depth_violations"] == 0
    return (EXIT_OK if ok else EXIT_NOCONV), rep, [], [args.out, rpath]


def cmd_verify(args):
    pts = read_points(args.points)
    if args.t < 0:
        raise UsageError("--t must be >= 0")
    space = HarmonicSpace(pts.shape[1] - 1, args.t)
    rep = verify_design(space, pts, args.tol, seed=args.seed).to_dict()
    inputs = [args.points]
    ok = rep["is_design"]
    if args.partition is not None:
        part = load_partition(args.partition)
        if part.N != pts.shape[0] or part.d != space.d:
            raise ValueError("partition does not match the point set")
        inside = np.array([c.contains(p)[0] for c, p in zip(part.cells, pts)])
        rep["points_outside_cells"] = int(np.sum(~inside))
        ok = ok and rep["points_outside_cells"] == 0
        inputs.append(args.partition)
    return (EXIT_OK if ok else EXIT_VERIFY), rep, inputs, []


def cmd_bound(args):
    if args.dim < 1 or args.t < 0:
        raise UsageError("need --dim >= 1 and --t >= 0")
    return EXIT_OK, lower_bound(args.dim, args.t), [], []


def cmd_faraday(args):
    pts = read_points(args.points)
    if not 0 < args.r < 1:
        raise UsageError("--r must lie in (0, 1)")
    if pts.shape[1] != 3:
        raise ValueError("faraday potential needs points on S^2")
    val = faraday_potential(pts, args.r, probe_count=args.probes)
    return EXIT_OK, {"r": args.r, "U_r": val, "probes": args.probes, "N": pts.shape[0]}, [args.points], []


def cmd_mz(args):
    part = load_partition(args.partition)
    if part.d != 2:
        raise UsageError("mz needs a partition of S^2")
    if args.degree < 1:
        raise UsageError("--degree must be >= 1")
    P = random_poly(HarmonicSpace(2, args.degree), args.seed)
    c, _ = part.incenters()
    rep = mz_check(part, c, c, P, eta=args.eta).to_dict()
    return EXIT_OK, rep, [args.partition], []


COMMANDS = {"partition": cmd_partition, "solve": cmd_solve, "verify": cmd_verify,
            "bound": cmd_bound, "faraday": cmd_faraday, "mz": cmd_mz}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    start = time.perf_counter()
    try:
        with threadpool_limits(limits=args.threads):
            code, report, inputs, outputs = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sphdesign {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"sphdesign {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(dumps(report))
    manifest = getattr(args, "manifest", None)
    if manifest is None and outputs:
        manifest = _sidecar(outputs[0], ".manifest.json")
    if manifest is not None:
        write_manifest(manifest, args.command, _params(args), __version__, inputs, outputs,
                       time.perf_counter() - start)
    return code


if __name__ == "__main__":
    sys.exit(main())

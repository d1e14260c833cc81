"""Scaled diameter and inradius of the equal-area partitions of S^2 as N grows.

    python scripts/partition_sweep.py --counts 24 96 384 1536 > partition_sweep.csv
"""
import argparse
import csv
import sys

from sphdesign.partition import build_partition, partition_norm
from sphdesign.verifier import verify_partition


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--counts", type=int, nargs="+", default=[24, 96, 384, 1536])
    ap.add_argument("--samples", type=int, default=0, help="Monte Carlo equal-area check; 0 skips it")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    w = csv.writer(sys.stdout)
    w.writerow(["d", "N", "norm", "K_emp", "min_inradius", "b_emp", "max_abs_z"])
    for N in args.counts:
        part = build_partition(args.dim, N, validate=False, seed=args.seed)
        scale = N ** (1.0 / args.dim)
        norm = partition_norm(part)
        r_min = float(part.incenters()[1].min())
        z = ""
        if args.samples:
            z = f"{verify_partition(part, args.samples, args.seed, convexity_pairs=10).max_abs_z:.3f}"
        w.writerow([args.dim, N, f"{norm:.6g}", f"{norm * scale:.6g}", f"{r_min:.6g}",
                    f"{r_min * scale:.6g}", z])


if __name__ == "__main__":
    main()

"""Potential deviation U_r of a solved design across radii, with the local log-log slope.

    python scripts/faraday_decay.py --degree 5 --count 72 > faraday.csv
"""
import argparse
import csv
import sys

import numpy as np

from sphdesign.designer import anchor_configuration, solve_positions
from sphdesign.harmonics import HarmonicSpace
from sphdesign.partition import build_partition
from sphdesign.verifier import faraday_potential


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--degree", type=int, default=5)
    ap.add_argument("--count", type=int, default=72)
    ap.add_argument("--radii", type=float, nargs="+", default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    ap.add_argument("--probes", type=int, default=4096)
    args = ap.parse_args()

    anchored = anchor_configuration(build_partition(2, args.count, validate=False))
    out, rep = solve_positions(HarmonicSpace(2, args.degree), anchored)
    if not rep["converged"]:
        sys.exit(f"solver stopped at residual {rep['final_residual']:.2e}")
    vals = [faraday_potential(out.points, r, probe_count=args.probes) for r in args.radii]
    w = csv.writer(sys.stdout)
    w.writerow(["r", "U_r", "slope"])
    for k, (r, u) in enumerate(zip(args.radii, vals)):
        slope = "" if k == 0 else f"{np.log(u / vals[k - 1]) / np.log(r / args.radii[k - 1]):.3f}"
        w.writerow([r, f"{u:.6e}", slope])


if __name__ == "__main__":
    main()

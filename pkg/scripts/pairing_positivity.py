"""Sample random polynomials on the unit gradient-L1 sphere and record the
average of P over the mapped points; every value should be positive.

    python scripts/pairing_positivity.py --degree 3 --count 600 --trials 100 > pairing.csv
"""
import argparse
import csv
import sys

from sphdesign.designer import DesignerConfig, anchor_configuration, pairing
from sphdesign.harmonics import HarmonicSpace, random_poly
from sphdesign.partition import build_partition


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--degree", type=int, default=3)
    ap.add_argument("--count", type=int, default=600)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--delta", type=float, default=0.3)
    args = ap.parse_args()

    cfg = DesignerConfig(epsilon=args.epsilon, delta=args.delta)
    anchored = anchor_configuration(build_partition(2, args.count, validate=False))
    space = HarmonicSpace(2, args.degree)
    w = csv.writer(sys.stdout)
    w.writerow(["seed", "pairing", "pairing_neg"])
    worst = float("inf")
    for seed in range(args.trials):
        P = random_poly(space, seed, "boundary")
        a, b = pairing(cfg, anchored, P), pairing(cfg, anchored, -P)
        worst = min(worst, a, b)
        w.writerow([seed, f"{a:.6g}", f"{b:.6g}"])
    print(f"minimum pairing {worst:.4g}", file=sys.stderr)


if __name__ == "__main__":
    main()

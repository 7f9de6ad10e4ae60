#!/usr/bin/env python3
"""Rate-distortion grid on discrete-normal hosts, static and adaptive, as CSV.

    python3 scripts/run_sweep.py --out results/sweep.csv
"""
import argparse
import csv
import sys
from pathlib import Path

from ansrdh.experiments import SweepRow, run_point


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigma", type=float, nargs="+", default=[128, 256, 512])
    ap.add_argument("--alpha", type=float, nargs="+", default=[1.0001, 1.001, 1.01, 1.1, 1.4])
    ap.add_argument("--n", type=int, default=65536)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--modes", nargs="+", default=["static", "dynamic"])
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SweepRow.header())
    for sigma in args.sigma:
        for alpha in args.alpha:
            for mode in args.modes:
                row = run_point(sigma, alpha, args.n, args.seed, mode)
                w.writerow(row.values())
                fh.flush()
                print(f"sigma={sigma:g} alpha={alpha:g} {mode:8s} rate={row.emp_rate:+.4f} "
                      f"(exp {row.exp_rate:.4f}) mse={row.emp_mse:.3f} (exp {row.exp_mse:.3f}) "
                      f"{row.runtime:.1f}s", file=sys.stderr)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()

"""E_inf against n (degree rule) and against r at fixed n, written as CSV.

    python scripts/convergence_sweep.py --ns 10 15 20 25 --mode antipodal -o sweep.csv
    python scripts/convergence_sweep.py --fixed-n 20 --r-range 7 19 -o trend.csv
"""
import argparse
import csv
import sys

from spherefit.diagnostics import (TEST_FUNCTIONS, default_grid_size, degree_rule, fit_antipodal,
                                   fit_fekete, uniform_error)
from spherefit.nodes import fibonacci_grid


def fit_one(mode, n, f, m, r):
    if mode == "fekete":
        return fit_fekete(fibonacci_grid((n + 1) ** 2), f, m, r)[0]
    # antipodal: a base set of about N/2 points is completed by the selector
    return fit_antipodal(fibonacci_grid((n + 1) ** 2 // 2), f, r)[0]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ns", type=int, nargs="*", default=[10, 15, 20])
    ap.add_argument("--mode", choices=["fekete", "antipodal"], default="fekete")
    ap.add_argument("--fixed-n", type=int, help="sweep r at this n instead of sweeping n")
    ap.add_argument("--m", type=int, help="interpolation degree for the r sweep")
    ap.add_argument("--r-range", type=int, nargs=2, metavar=("LO", "HI"))
    ap.add_argument("-o", "--output", default="-")
    args = ap.parse_args(argv)

    out = sys.stdout if args.output == "-" else open(args.output, "w", newline="")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["mode", "n", "m", "r", "function", "E_inf"])
    if args.fixed_n is None:
        jobs = [(n, *degree_rule(n)) for n in args.ns]
    else:
        n = args.fixed_n
        m = args.m if args.m is not None else degree_rule(n)[0]
        lo, hi = args.r_range or (m + 1, n - 1)
        jobs = [(n, m, r) for r in range(lo, hi + 1)]
    for n, m, r in jobs:
        for name, f in TEST_FUNCTIONS.items():
            fit = fit_one(args.mode, n, f, m, r)
            e = uniform_error(fit, f, default_grid_size(n)).E_inf
            w.writerow([args.mode, n, m, r, name, f"{e:.6e}"])
    if out is not sys.stdout:
        out.close()


if __name__ == "__main__":
    main()

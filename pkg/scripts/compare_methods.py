"""Uniform errors of interpolation only, interpolation-regression and pure least squares.

Fibonacci sampling nodes with N = (n+1)^2, approximate Fekete interpolation
nodes of size (m+1)^2 and the degree rule for m and r unless given.

    python scripts/compare_methods.py --n 20
"""
import argparse

import numpy as np

from spherefit.diagnostics import (TEST_FUNCTIONS, default_grid_size, degree_rule, fit_fekete,
                                   interpolate_degree_m, sup_error_coeffs)
from spherefit.harmonics import HarmonicBasis, eval_basis
from spherefit.nodes import fibonacci_grid
from spherefit.selection import fekete_select


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--m", type=int)
    ap.add_argument("--r", type=int)
    ap.add_argument("--L", type=int, help="validation grid size (default 4(n+1)^2)")
    args = ap.parse_args(argv)

    m_rule, r_rule = degree_rule(args.n)
    m = args.m if args.m is not None else m_rule
    r = args.r if args.r is not None else r_rule
    X = fibonacci_grid((args.n + 1) ** 2)
    grid = fibonacci_grid(args.L or default_grid_size(args.n))
    sel = fekete_select(X, m, r)
    V = eval_basis(HarmonicBasis(r), X.points)
    print(f"n={args.n} N={len(X)} m={m} M={sel.M} r={r} L={len(grid)}")
    print(f"{'f':<4}{'interp':>12}{'interp-reg':>12}{'least sq':>12}")
    for name, f in TEST_FUNCTIONS.items():
        fit, _, _ = fit_fekete(X, f, m, r)
        e_ir = sup_error_coeffs(fit.basis, fit.coeffs, f, grid)
        cm = interpolate_degree_m(sel.subset, f(sel.subset.points), m)
        e_int = sup_error_coeffs(HarmonicBasis(m), cm, f, grid)
        cls = np.linalg.lstsq(V, f(X.points), rcond=None)[0]
        e_ls = sup_error_coeffs(HarmonicBasis(r), cls, f, grid)
        print(f"{name:<4}{e_int:12.3e}{e_ir:12.3e}{e_ls:12.3e}")


if __name__ == "__main__":
    main()

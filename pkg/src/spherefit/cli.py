"""Command-line interface: ``spherefit <subcommand> ...``.

Exit codes: 0 success, 1 certificate failure, 2 input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .errors import (AntipodalCollision, NotAntipodal, NotUnisolvent, OffSphereError,
                     ParseError, RankDeficient, SingularKKT, SphereFitError)
from .harmonics import HarmonicBasis
from .nodes import (DUPLICATE_TOL, NodeSet, antipodal_complete, equatorial_nodes,
                    fibonacci_grid, format_nodes, icosahedron, interleave_pairs, load_nodes,
                    random_nodes, verify_design)
from .selection import antipodal_select, fekete_select
from .solver import (CONSTRAINT_GATE, ORTHOGONALITY_GATE, SCHEMA, FitProblem, FitResult,
                     assemble_kkt, design_alpha, design_spectrum, evaluate_fit, kkt_inertia,
                     solve)
from .vandermonde import RANK_THRESHOLD, assemble

log = logging.getLogger("spherefit")

EXIT_OK, EXIT_CERT, EXIT_INPUT = 0, 1, 2
INERTIA_MAX_SIZE = 4000


class InputError(Exception):
    pass


class CertificateFailure(Exception):
    pass


@dataclass
class RunConfig:
    """Resolved degrees for one run: explicit values win over the n-based rules."""

    n: int | None = None
    m: int | None = None
    r: int | None = None

    def resolve(self) -> "RunConfig":
        n, m, r = self.n, self.m, self.r
        if n is not None and (m is None or r is None):
            rule_m, rule_r = dg.degree_rule(n)
            m = rule_m if m is None else m
            r = (m + math.isqrt(2 * m)) if r is None else r
        if n is not None and r is not None and not r < n:
            raise InputError(f"need r < n, got r={r}, n={n}")
        if m is not None and r is not None and not m < r:
            raise InputError(f"need m < r, got m={m}, r={r}")
        return RunConfig(n, m, r)


# ---------------------------------------------------------------- helpers

def _write_text(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _dump_json(obj, path) -> None:
    _write_text(json.dumps(obj, indent=2) + "\n", path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _load(path, tol=DUPLICATE_TOL) -> NodeSet:
    try:
        X = load_nodes(path)
    except FileNotFoundError as exc:
        raise InputError(f"no such node file: {path}") from exc
    if tol != DUPLICATE_TOL:
        X = NodeSet(X.points, X.label, None, tol)
    return X


def _load_data(path, N: int) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except FileNotFoundError as exc:
        raise InputError(f"no such data file: {path}") from exc
    if Path(path).suffix.lower() == ".json":
        values = np.asarray(json.loads(text), dtype=float).reshape(-1)
    else:
        vals = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                try:
                    vals.append(float(line.split(",")[-1]))
                except ValueError as exc:
                    if not vals:  # tolerate a header line
                        continue
                    raise InputError(f"{path}: bad data line {line!r}") from exc
        values = np.array(vals, dtype=float)
    if values.size != N:
        raise InputError(f"data has {values.size} values but the node set has N={N}")
    return values


def _subset_indices(args, X: NodeSet) -> list[int]:
    if getattr(args, "subset", None):
        data = json.loads(Path(args.subset).read_text())
        idx = [int(i) for i in data.get("indices", [])]
    elif getattr(args, "subset_xyz", None):
        S = load_nodes(args.subset_xyz)
        from scipy.spatial import cKDTree
        dist, idx = cKDTree(X.points).query(S.points)
        if np.any(dist > 1e-9):
            raise InputError("subset points are not all present in the node set")
        idx = [int(i) for i in idx]
    else:
        idx = []
    if any(i < 0 or i >= len(X) for i in idx):
        raise InputError("subset index out of range for the node set")
    return idx


def _infer_n(N: int) -> int | None:
    n = math.isqrt(N) - 1
    return n if (n + 1) ** 2 == N else None


# ---------------------------------------------------------------- subcommands

def cmd_gen_nodes(args) -> int:
    sources = [args.fibonacci, args.random, args.equatorial, args.complete, args.icosahedron or None]
    if sum(s is not None and s is not False for s in sources) != 1:
        raise InputError("choose exactly one of --fibonacci, --random, --equatorial, "
                         "--icosahedron, --complete")
    if args.fibonacci is not None:
        X = fibonacci_grid(args.fibonacci)
    elif args.random is not None:
        X = random_nodes(args.random, args.seed)
    elif args.equatorial is not None:
        X = equatorial_nodes(args.equatorial)
    elif args.icosahedron:
        X = icosahedron()
    else:
        base = _load(args.complete, args.tol)
        # pairs are written on adjacent lines: x_1, -x_1, x_2, -x_2, ...
        X = interleave_pairs(antipodal_complete(base, args.tol))
    _write_text(format_nodes(X, args.format), args.output)
    return EXIT_OK


def _select_antipodal(X: NodeSet, r: int, args):
    try:
        P = X.with_detected_pairing()
    except NotAntipodal as exc:
        raise InputError("antipodal mode needs an antipodally symmetric node file; "
                         "create one with `gen-nodes --complete`") from exc
    partner = P.antipodal_partner()
    reps = [a for a, _ in P.pairing]
    sel = antipodal_select(P.subset(reps), r, args.threshold, args.candidate_cap, args.tol)
    n_base = len(reps)
    mapped = [reps[i] if i < n_base else int(partner[reps[i - n_base]]) for i in sel.indices]
    sel.indices = mapped
    sel.nodes = P
    return sel


def cmd_select(args) -> int:
    X = _load(args.nodes, args.tol)
    cfg = RunConfig(args.n if args.n is not None else _infer_n(len(X)), args.m, args.r)
    if args.mode == "antipodal":
        if args.r is None:
            raise InputError("antipodal mode needs --r")
        sel = _select_antipodal(X, args.r, args)
        if sel.M == 0:
            print("warning: no admissible interpolation degree; subset is empty "
                  "(fit reduces to unconstrained least squares)", file=sys.stderr)
    else:
        if cfg.m is None:
            if cfg.n is None:
                raise InputError("fekete mode needs --m, or --n / a node count (n+1)^2")
            cfg = cfg.resolve()
        sel = fekete_select(X, cfg.m, args.r, args.threshold)
    out = sel.to_dict()
    out["mode"] = args.mode
    out["nodes"] = str(args.nodes)
    _dump_json(out, args.output)
    if args.subset_out:
        Path(args.subset_out).write_text(format_nodes(sel.subset, "xyz"))
    return EXIT_OK


def _certify(problem: FitProblem, result: FitResult, want_inertia: bool) -> list[str]:
    failures = []
    fscale = 1.0 + np.abs(problem.f_N).max(initial=0.0)
    if result.constraint_defect > CONSTRAINT_GATE * fscale:
        failures.append(f"constraint defect {result.constraint_defect:.3e} above gate")
    if result.orthogonality_defect is not None and result.orthogonality_defect >= ORTHOGONALITY_GATE:
        failures.append(f"orthogonality defect {result.orthogonality_defect:.3e} above gate")
    if want_inertia and problem.R + problem.M <= INERTIA_MAX_SIZE:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result.inertia = kkt_inertia(assemble_kkt(problem))
        if result.inertia != (problem.R, problem.M, 0):
            failures.append(f"KKT inertia {result.inertia} != ({problem.R}, {problem.M}, 0)")
    return failures


def cmd_fit(args) -> int:
    X = _load(args.nodes, args.tol)
    if args.function:
        f_N = dg.get_test_function(args.function)(X.points)
    elif args.data:
        f_N = _load_data(args.data, len(X))
    else:
        raise InputError("provide --data FILE or --function f1..f4")
    rows = _subset_indices(args, X)
    r = args.r if args.r is not None else (dg.degree_rule(args.n)[1] if args.n else None)
    if r is None:
        raise InputError("fit needs --r (or --n for the degree rule)")
    if args.n is not None and not r < args.n:
        raise InputError(f"need r < n, got r={r}, n={args.n}")
    parity = args.path == "parity"
    if parity:
        try:
            X = X.with_detected_pairing()
        except NotAntipodal as exc:
            raise InputError(str(exc)) from exc
    alpha = None
    if args.path == "design":
        cert = verify_design(X, 2 * r)
        if not cert.granted:
            raise CertificateFailure(f"nodes are not a {2 * r}-design "
                                     f"(max defect {cert.max_defect:.3e})")
        alpha = design_alpha(X)
    V = assemble(X, HarmonicBasis(r, parity_ordered=parity))
    problem = FitProblem(V, rows, f_N, path=args.path, design_alpha=alpha,
                         rank_threshold=args.threshold)
    result = solve(problem)
    failures = _certify(problem, result, not args.no_inertia)
    out = result.to_dict()
    out["N"], out["M"] = len(X), len(rows)
    out["certificates_passed"] = not failures
    out["certificate_failures"] = failures
    _dump_json(out, args.output)
    if failures:
        for msg in failures:
            print(f"certificate failure: {msg}", file=sys.stderr)
        if not args.no_strict:
            return EXIT_CERT
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        result = FitResult.from_dict(json.loads(Path(args.fit).read_text()))
    except (FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read fit file {args.fit}: {exc}") from exc
    if args.points:
        P = _load(args.points)
    elif args.fibonacci:
        P = fibonacci_grid(args.fibonacci)
    else:
        raise InputError("provide --points FILE or --fibonacci L")
    values = evaluate_fit(result, P.points)
    header = ["x", "y", "z", "value"]
    cols = [P.points[:, 0], P.points[:, 1], P.points[:, 2], values]
    if args.function:
        fv = dg.get_test_function(args.function)(P.points)
        header += ["f", "abs_error"]
        cols += [fv, np.abs(fv - values)]
        print(json.dumps({"schema": SCHEMA, "function": args.function, "grid_size": len(P),
                          "E_inf": float(np.abs(fv - values).max())}), file=sys.stderr)
    rows = [[float(c[i]) for c in cols] for i in range(len(P))]
    _write_text(_csv_text(header, rows), args.output)
    return EXIT_OK


def cmd_validate_degree(args) -> int:
    families = [_load(p, args.tol) for p in args.nodes]
    functions = [dg.get_test_function(f) for f in args.functions]
    r_star, table = dg.validate_degree(functions, families, args.degrees, args.L, args.threshold)
    rows = [[r, f, fam, float(table.cells[r, f, fam])]
            for r in table.degrees for f in table.functions for fam in table.families]
    if args.csv:
        Path(args.csv).write_text(_csv_text(["r", "function", "family", "E_inf"], rows))
    out = {
        "schema": SCHEMA,
        "r_star": r_star,
        "E": {str(r): (v if math.isfinite(v) else None) for r, v in table.totals().items()},
        "failures": [{"r": k[0], "function": k[1], "family": k[2], "error": v}
                     for k, v in table.failures.items()],
    }
    _dump_json(out, args.output)
    return EXIT_OK


def _trend_ok(values, factor: float = 2.0) -> bool:
    return all(b <= factor * a for a, b in zip(values, values[1:]))


def sweep_rows(ns, functions, mode="fekete", m=None, r_values=None, L=None,
               threshold=RANK_THRESHOLD):
    """E_inf rows (n, r, m, function, E_inf) over n values and optional r overrides."""
    rows = []
    for n in ns:
        N = (n + 1) ** 2
        grid = fibonacci_grid(L or dg.default_grid_size(n))
        rule_m, rule_r = dg.degree_rule(n)
        mm = m if m is not None else rule_m
        for r in (r_values or [rule_r]):
            cfg = RunConfig(n, mm, r).resolve()
            for name in functions:
                f = dg.get_test_function(name)
                if mode == "fekete":
                    fit, _, sel = dg.fit_fekete(fibonacci_grid(N), f, cfg.m, r,
                                                rel_threshold=threshold)
                    m_used = cfg.m
                else:
                    fit, _, sel = dg.fit_antipodal(fibonacci_grid(N), f, r,
                                                   rel_threshold=threshold)
                    m_used = sel.m
                err = dg.sup_error_coeffs(fit.basis, fit.coeffs, f, grid)
                rows.append([n, r, m_used if m_used is not None else "", name, err])
    return rows


def cmd_report(args) -> int:
    if args.kind == "sweep":
        rows = sweep_rows(args.n or [], args.functions, args.mode, args.m, args.r, args.L,
                          args.threshold)
        flags = {}
        for name in args.functions:
            seq = [row[4] for row in rows if row[3] == name]
            flags[name] = "yes" if _trend_ok(seq) else "no"
        rows = [row + [flags[row[3]]] for row in rows]
        _write_text(_csv_text(["n", "r", "m", "function", "E_inf", "trend_nonincreasing"], rows),
                    args.output)
        return EXIT_OK

    # spectrum report on a certified design
    if not args.nodes or args.r is None:
        raise InputError("spectrum report needs --nodes and --r")
    X = _load(args.nodes, args.tol)
    r = args.r[0]
    cert = verify_design(X, 2 * r)
    if not cert.granted:
        raise CertificateFailure(f"nodes are not a {2 * r}-design (max defect {cert.max_defect:.3e})")
    alpha = design_alpha(X)
    V = assemble(X, HarmonicBasis(r))
    if args.subset:
        rows_idx = _subset_indices(args, X)
    else:
        m = args.m if args.m is not None else r - 1
        rows_idx = fekete_select(X, m, r, args.threshold).indices
    rep = design_spectrum(alpha, V.entries[rows_idx], args.threshold)
    header = ["N", "r", "R", "M", "alpha", "alpha_multiplicity", "alpha_multiplicity_numeric",
              "kappa2_formula", "kappa2_numeric", "kappa2_rel_error", "max_eig_rel_error"]
    row = [len(X), r, rep.R, rep.M, rep.alpha, rep.R - rep.M, rep.alpha_multiplicity_numeric,
           rep.kappa2_formula, rep.kappa2_numeric, rep.kappa2_rel_error, rep.max_eig_rel_error]
    _write_text(_csv_text(header, [row]), args.output)
    if args.json:
        _dump_json(rep.to_dict(), args.json)
    return EXIT_OK


def cmd_design_check(args) -> int:
    X = _load(args.nodes, args.tol)
    cert = verify_design(X, args.k, args.design_tol)
    _dump_json({"schema": SCHEMA, "N": len(X), "strength": cert.strength,
                "max_defect": cert.max_defect, "granted": cert.granted,
                "alpha": design_alpha(X)}, args.output)
    return EXIT_OK if cert.granted else EXIT_CERT


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults (flags override it)")
    common.add_argument("--threshold", type=float, default=RANK_THRESHOLD,
                        help="relative singular-value threshold for rank decisions")
    common.add_argument("--tol", type=float, default=DUPLICATE_TOL,
                        help="duplicate/antipode distance tolerance")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-o", "--output", default="-", help="output path ('-' = stdout)")

    ap = argparse.ArgumentParser(prog="spherefit", description="Interpolation-regression "
                                 "fitting of spherical polynomials on scattered nodes.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-nodes", parents=[common], help="generate or complete node sets")
    p.add_argument("--fibonacci", type=int, metavar="L")
    p.add_argument("--random", type=int, metavar="N")
    p.add_argument("--equatorial", type=int, metavar="N")
    p.add_argument("--icosahedron", action="store_true")
    p.add_argument("--complete", metavar="FILE", help="write FILE together with its antipodes")
    p.add_argument("--format", choices=["xyz", "csv", "json"], default="xyz")
    p.set_defaults(func=cmd_gen_nodes)

    p = sub.add_parser("select", parents=[common], help="choose the interpolation subset")
    p.add_argument("--nodes", required=True)
    p.add_argument("--mode", choices=["antipodal", "fekete"], default="fekete")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--candidate-cap", type=int, default=None)
    p.add_argument("--subset-out", help="also write the subset as xyz-text")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("fit", parents=[common], help="constrained least-squares fit")
    p.add_argument("--nodes", required=True)
    p.add_argument("--data", help="one value per node, one per line (or JSON array)")
    p.add_argument("--function", choices=sorted(dg.TEST_FUNCTIONS))
    p.add_argument("--subset", help="selection JSON produced by `select`")
    p.add_argument("--subset-xyz", help="interpolation nodes as an xyz file")
    p.add_argument("--n", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--path", choices=["auto", "nullspace", "kkt-direct", "parity", "design"],
                   default="auto")
    p.add_argument("--no-strict", action="store_true", help="exit 0 even if a certificate fails")
    p.add_argument("--no-inertia", action="store_true", help="skip the KKT inertia certificate")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", parents=[common], help="evaluate a fitted polynomial")
    p.add_argument("--fit", required=True)
    p.add_argument("--points")
    p.add_argument("--fibonacci", type=int, metavar="L")
    p.add_argument("--function", choices=sorted(dg.TEST_FUNCTIONS))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("validate-degree", parents=[common],
                       help="choose r by validation over node families")
    p.add_argument("--nodes", nargs="+", required=True, help="base node files (not completed)")
    p.add_argument("--functions", nargs="+", default=["f1", "f2", "f3", "f4"])
    p.add_argument("--degrees", nargs="+", type=int, required=True)
    p.add_argument("--L", type=int)
    p.add_argument("--csv", help="write the per-cell error table here")
    p.set_defaults(func=cmd_validate_degree)

    p = sub.add_parser("report", parents=[common], help="error sweeps and design spectra")
    p.add_argument("kind", choices=["sweep", "spectrum"])
    p.add_argument("--n", type=int, nargs="*", default=None)
    p.add_argument("--m", type=int)
    p.add_argument("--r", type=int, nargs="*", default=None)
    p.add_argument("--functions", nargs="+", default=["f1", "f2", "f3", "f4"])
    p.add_argument("--mode", choices=["antipodal", "fekete"], default="fekete")
    p.add_argument("--L", type=int)
    p.add_argument("--nodes", help="design node file (spectrum)")
    p.add_argument("--subset", help="selection JSON for X_M (spectrum)")
    p.add_argument("--json", help="also write the full spectrum report as JSON")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("design-check", parents=[common], help="certify a spherical design")
    p.add_argument("--nodes", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--design-tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_design_check)
    return ap


def _parse(parser: argparse.ArgumentParser, argv):
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (FileNotFoundError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BrokenPipeError:
        # downstream reader closed early (e.g. `| head`); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except CertificateFailure as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (InputError, ParseError, OffSphereError, AntipodalCollision, NotAntipodal,
            NotUnisolvent, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (RankDeficient, SingularKKT, SphereFitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CERT


if __name__ == "__main__":
    sys.exit(main())

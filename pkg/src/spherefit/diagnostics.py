"""Error metrics, test functions, degree validation and quasi-optimality constants."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NotUnisolvent, SphereFitError
from .harmonics import FOUR_PI, HarmonicBasis, eval_basis
from .nodes import NodeSet, fibonacci_grid
from .selection import antipodal_select, fekete_select
from .solver import FitProblem, FitResult, evaluate_fit, null_space_basis, solve
from .vandermonde import RANK_THRESHOLD, VandermondeMatrix, assemble, rank_report_from_matrix

REL_GUARD = 1e-14
ABS_TOL = 1e-12


@dataclass(frozen=True)
class TestFunction:
    id: str
    evaluator: Callable[[np.ndarray], np.ndarray]

    __test__ = False  # not a pytest class

    def __call__(self, points) -> np.ndarray:
        pts = getattr(points, "points", points)
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.asarray(self.evaluator(pts), dtype=float)


def _f1(p):
    return np.exp(p[:, 0] * p[:, 2])


def _f2(p):
    return np.sin(3 * p[:, 0]) + 0.5 * np.cos(2 * p[:, 1] * p[:, 2])


def _f3(p):
    x, y, z = p.T
    return 1.0 / (3 + x**2 + 2 * y**2 + 4 * z**2)


def _f4(p):
    x, y, z = p.T
    return 1.0 / ((x + 1.5) ** 2 + (y + 1.5) ** 2 + (z + 1.5) ** 2)


TEST_FUNCTIONS = {
    "f1": TestFunction("f1", _f1),
    "f2": TestFunction("f2", _f2),
    "f3": TestFunction("f3", _f3),
    "f4": TestFunction("f4", _f4),
}


def get_test_function(name: str) -> TestFunction:
    try:
        return TEST_FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown test function {name!r}; choose from {sorted(TEST_FUNCTIONS)}")


def polynomial_function(basis: HarmonicBasis, coeffs, name: str = "custom") -> TestFunction:
    coeffs = np.asarray(coeffs, dtype=float)
    return TestFunction(name, lambda p: eval_basis(basis, p) @ coeffs)


def default_grid_size(n: int) -> int:
    return 4 * (n + 1) ** 2


# ---------------------------------------------------------------- errors

@dataclass
class ErrorReport:
    E_inf: float
    grid_size: int
    errors: np.ndarray | None = None


def uniform_error(fit: FitResult, f: TestFunction, L: int, keep_errors: bool = False) -> ErrorReport:
    """Max |f - p_hat| over the Fibonacci validation grid of L points."""
    if L < 1:
        raise ValueError("L must be positive")
    grid = fibonacci_grid(L)
    err = np.abs(f(grid.points) - evaluate_fit(fit, grid.points))
    return ErrorReport(float(err.max()), L, err if keep_errors else None)


def sup_error_coeffs(basis: HarmonicBasis, coeffs, f: TestFunction, grid: NodeSet) -> float:
    return float(np.abs(f(grid.points) - eval_basis(basis, grid.points) @ coeffs).max())


# ---------------------------------------------------------------- interpolation

def interpolate_degree_m(X_M: NodeSet, values, m: int,
                         rel_threshold: float = RANK_THRESHOLD) -> np.ndarray:
    """Coefficients (natural order, degree m) of the interpolant p_m on X_M."""
    M = (m + 1) ** 2
    if len(X_M) != M:
        raise NotUnisolvent(f"|X_M| = {len(X_M)} but dim Pi_{m} = {M}")
    V = eval_basis(HarmonicBasis(m), X_M.points)
    rep = rank_report_from_matrix(V, rel_threshold)
    if rep.numerical_rank < M:
        raise NotUnisolvent(f"degree-{m} Vandermonde on X_M has rank {rep.numerical_rank} < {M}")
    values = np.asarray(values, dtype=float)
    return np.linalg.solve(V, values)


def lebesgue_constant(X_M: NodeSet, m: int, L: int,
                      rel_threshold: float = RANK_THRESHOLD) -> float:
    """Grid lower bound max_y sum_j |l_j(y)| over fibonacci_grid(L)."""
    M = (m + 1) ** 2
    if len(X_M) != M:
        raise NotUnisolvent(f"|X_M| = {len(X_M)} but dim Pi_{m} = {M}")
    basis = HarmonicBasis(m)
    V = eval_basis(basis, X_M.points)
    if rank_report_from_matrix(V, rel_threshold).numerical_rank < M:
        raise NotUnisolvent("X_M is not unisolvent")
    B = eval_basis(basis, fibonacci_grid(L).points)
    # cardinal functions at y: solve V^T l(y) = b(y)
    card = np.linalg.solve(V.T, B.T)
    return float(np.abs(card).sum(axis=0).max())


def norming_constant(V_N: VandermondeMatrix, rel_threshold: float = RANK_THRESHOLD) -> float:
    """alpha_r = lambda_min(V^T V) / N, or 0 when V lacks full column rank."""
    sigma = V_N.singular_values
    if V_N.rows < V_N.cols or sigma[0] == 0 or sigma[-1] < rel_threshold * sigma[0]:
        return 0.0
    return float(sigma[-1] ** 2 / V_N.rows)


def quasi_opt_prefactor(alpha_r: float, lebesgue: float) -> float:
    """(sqrt(4 pi) + 1/sqrt(alpha_r)) (1 + Lambda_M)."""
    if not alpha_r > 0:
        raise ValueError("alpha_r must be positive")
    if not lebesgue >= 1:
        raise ValueError("a Lebesgue constant is at least 1")
    return (math.sqrt(FOUR_PI) + 1.0 / math.sqrt(alpha_r)) * (1.0 + lebesgue)


@dataclass
class QuasiOptReport:
    lebesgue: float
    norming: float
    prefactor: float
    grid_size: int

    def to_dict(self) -> dict:
        return {
            "schema": "spherefit/1",
            "lebesgue": self.lebesgue,
            "lebesgue_grid_size": self.grid_size,
            "norming": self.norming,
            "prefactor": self.prefactor,
            "note": "L2 error <= prefactor * best uniform approximation error; "
                    "the best-approximation term is not computed",
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def quasi_opt_report(V_N: VandermondeMatrix, X_M: NodeSet, m: int, L: int) -> QuasiOptReport:
    lam = lebesgue_constant(X_M, m, L)
    alpha = norming_constant(V_N)
    pref = quasi_opt_prefactor(alpha, lam) if alpha > 0 else math.inf
    return QuasiOptReport(lam, alpha, pref, L)


# ---------------------------------------------------------------- Pythagorean identity

def _guarded_rel(defect: float, scale: float) -> float:
    if scale < REL_GUARD:
        return 0.0 if abs(defect) < ABS_TOL else abs(defect)
    return abs(defect) / scale


def pythagorean_check(problem: FitProblem, fit: FitResult, pm_coeffs) -> float:
    """Relative defect of ||f-p||^2 + ||p-p_m||^2 = ||f-p_m||^2 on X_N.

    ``pm_coeffs`` is the degree-m interpolant on X_M (natural ordering) with
    (m+1)^2 = M. The returned value is the larger of the Pythagorean defect
    and the projection defect max_q |<f - p_hat, q>_X| / (||f - p_m|| ||q||)
    over a basis of degree-r polynomials vanishing on X_M.
    """
    pm_coeffs = np.asarray(pm_coeffs, dtype=float)
    m = int(round(math.sqrt(pm_coeffs.size))) - 1
    if (m + 1) ** 2 != pm_coeffs.size or pm_coeffs.size != problem.M:
        raise NotUnisolvent("p_m coefficients must have length M = (m+1)^2")
    nodes = problem.V_N.nodes
    if nodes is None:
        raise ValueError("problem Vandermonde carries no node set")
    V = problem.V_N.entries
    p_hat = V @ fit.coeffs
    p_m = eval_basis(HarmonicBasis(m), nodes.points) @ pm_coeffs
    f = problem.f_N
    a = np.sum((f - p_hat) ** 2)
    b = np.sum((p_hat - p_m) ** 2)
    c = np.sum((f - p_m) ** 2)
    pyth = _guarded_rel(a + b - c, c)
    Z = null_space_basis(problem.V_M, problem.R)
    proj = 0.0
    if Z.shape[1]:
        VZ = V @ Z
        qn = np.linalg.norm(VZ, axis=0)
        inner = np.abs(((f - p_m) - (p_hat - p_m)) @ VZ)
        scale = math.sqrt(c)
        proj = float(max(_guarded_rel(v, scale * q) for v, q in zip(inner, qn)))
    return float(max(pyth, proj))


# ---------------------------------------------------------------- pipelines

def fit_antipodal(X_base: NodeSet, f: TestFunction, r: int, path: str = "auto",
                  rel_threshold: float = RANK_THRESHOLD):
    """Complete X_base antipodally, select X_M with the antipodal strategy and fit."""
    sel = antipodal_select(X_base, r, rel_threshold)
    V = assemble(sel.nodes, HarmonicBasis(r, parity_ordered=True))
    problem = FitProblem(V, sel.indices, f(sel.nodes.points), path=path,
                         rank_threshold=rel_threshold)
    return solve(problem), problem, sel


def fit_fekete(X: NodeSet, f: TestFunction, m: int, r: int, path: str = "auto",
               rel_threshold: float = RANK_THRESHOLD):
    """Approximate Fekete subset of size (m+1)^2, then the degree-r constrained fit."""
    sel = fekete_select(X, m, r, rel_threshold)
    V = assemble(X, HarmonicBasis(r))
    problem = FitProblem(V, sel.indices, f(X.points), path=path, rank_threshold=rel_threshold)
    return solve(problem), problem, sel


def degree_rule(n: int) -> tuple[int, int]:
    """m = floor(n/4) + 1 and r = m + floor(sqrt(2m))."""
    m = n // 4 + 1
    return m, m + math.isqrt(2 * m)


@dataclass
class ValidationTable:
    degrees: list[int]
    functions: list[str]
    families: list[str]
    cells: dict = field(default_factory=dict)  # (r, function, family) -> E_inf
    failures: dict = field(default_factory=dict)

    def total(self, r: int) -> float:
        return float(sum(v for (rr, _, _), v in self.cells.items() if rr == r))

    def totals(self) -> dict:
        return {r: self.total(r) for r in self.degrees}


def validate_degree(functions: Sequence[TestFunction], node_families: Sequence[NodeSet],
                    candidate_degrees: Sequence[int], L: int | None = None,
                    rel_threshold: float = RANK_THRESHOLD):
    """Pick r* = argmin_r sum_{s,j} ||f_s - p_hat_r^{(j)}[f_s]||_inf (ties toward smaller r).

    Each node family is a base set; it is completed antipodally and the
    interpolation subset comes from ``antipodal_select``. A failed cell counts
    as +inf and is recorded in ``failures``.
    """
    if not functions or not node_families or not candidate_degrees:
        raise ValueError("functions, node families and candidate degrees must be nonempty")
    if L is None:
        L = default_grid_size(max(int(math.isqrt(len(X))) for X in node_families))
    grid = fibonacci_grid(L)
    table = ValidationTable(sorted(candidate_degrees), [f.id for f in functions],
                            [X.label or f"family{j}" for j, X in enumerate(node_families)])
    for r in table.degrees:
        for j, X in enumerate(node_families):
            try:
                sel = antipodal_select(X, r, rel_threshold)
                V = assemble(sel.nodes, HarmonicBasis(r, parity_ordered=True))
            except SphereFitError as exc:
                for f in functions:
                    table.cells[r, f.id, table.families[j]] = math.inf
                    table.failures[r, f.id, table.families[j]] = str(exc)
                continue
            for f in functions:
                key = (r, f.id, table.families[j])
                try:
                    problem = FitProblem(V, sel.indices, f(sel.nodes.points),
                                         rank_threshold=rel_threshold)
                    fit = solve(problem, certify=False)
                    table.cells[key] = sup_error_coeffs(fit.basis, fit.coeffs, f, grid)
                except (SphereFitError, np.linalg.LinAlgError) as exc:
                    table.cells[key] = math.inf
                    table.failures[key] = str(exc)
    totals = table.totals()
    r_star = min(table.degrees, key=lambda r: (totals[r], r))
    return r_star, table

"""Constrained least squares on the sphere: interpolate on X_M, regress on X_N.

Solves  min ||V_N c - f_N||_2  subject to  V_M c = f_M  through four routes:

* ``nullspace`` (default): parametrize {c : V_M c = f_M} by an SVD null-space
  basis of V_M and solve an unconstrained problem on V_N directly.
* ``kkt-direct``: factorize the symmetric indefinite KKT matrix
  [[V_N^T V_N, V_M^T], [V_M, 0]].
* ``parity``: on antipodal node sets, split data into even/odd parts and solve
  two independent reduced problems.
* ``design``: when V_N^T V_N = alpha I (spherical design of strength >= 2r),
  eliminate c and solve the M x M Schur system.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import NotAntipodal, RankDeficient, RankWarning, SingularKKT
from .harmonics import FOUR_PI, HarmonicBasis, eval_basis
from .nodes import NodeSet
from .vandermonde import RANK_THRESHOLD, VandermondeMatrix, rank_report, rank_report_from_matrix

PATHS = ("auto", "kkt-direct", "nullspace", "parity", "design")
ABS_SIGMA_FLOOR = 1e-14
CONSTRAINT_GATE = 1e-8
ORTHOGONALITY_GATE = 1e-8
RESIDUAL_FLOOR = 1e-4
SCHEMA = "spherefit/1"


@dataclass
class FitProblem:
    """Data and constraint layout of one interpolation-regression fit.

    ``constraint_rows`` are 0-based row indices of X_M inside X_N; f_M is
    always read off f_N at those rows.
    """

    V_N: VandermondeMatrix
    constraint_rows: np.ndarray
    f_N: np.ndarray
    path: str = "auto"
    design_alpha: float | None = None
    rank_threshold: float = RANK_THRESHOLD

    def __post_init__(self):
        self.constraint_rows = np.asarray(self.constraint_rows, dtype=int).reshape(-1)
        self.f_N = np.asarray(self.f_N, dtype=float).reshape(-1)
        if self.f_N.shape[0] != self.V_N.rows:
            raise ValueError(f"data has length {self.f_N.shape[0]}, expected N={self.V_N.rows}")
        rows = self.constraint_rows
        if rows.size and (rows.min() < 0 or rows.max() >= self.V_N.rows):
            raise ValueError("constraint row index out of range")
        if np.unique(rows).size != rows.size:
            raise ValueError("constraint rows must be distinct")
        if self.path not in PATHS:
            raise ValueError(f"unknown solver path {self.path!r}; choose from {PATHS}")
        N, R, M = self.V_N.rows, self.V_N.cols, rows.size
        if not (M <= R < N):
            warnings.warn(f"unusual problem shape M={M}, R={R}, N={N} (expected M <= R < N)",
                          RankWarning, stacklevel=2)

    @property
    def f_M(self) -> np.ndarray:
        return self.f_N[self.constraint_rows]

    @property
    def V_M(self) -> np.ndarray:
        return self.V_N.entries[self.constraint_rows]

    @property
    def basis(self) -> HarmonicBasis:
        return self.V_N.basis

    @property
    def R(self) -> int:
        return self.V_N.cols

    @property
    def M(self) -> int:
        return self.constraint_rows.size

    def with_data(self, f_N) -> "FitProblem":
        return FitProblem(self.V_N, self.constraint_rows, f_N, self.path, self.design_alpha,
                          self.rank_threshold)


@dataclass
class FitResult:
    coeffs: np.ndarray
    multipliers: np.ndarray
    residual_norm: float
    constraint_defect: float
    path_taken: str
    basis: HarmonicBasis
    orthogonality_defect: float | None = None
    inertia: tuple[int, int, int] | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "degree": self.basis.degree,
            "parity_ordered": self.basis.parity_ordered,
            "ordering": self.basis.ordering_list(),
            "coeffs": [float(c) for c in self.coeffs],
            "multipliers": [float(g) for g in self.multipliers],
            "residual_norm": float(self.residual_norm),
            "constraint_defect": float(self.constraint_defect),
            "orthogonality_defect": (None if self.orthogonality_defect is None
                                     else float(self.orthogonality_defect)),
            "path": self.path_taken,
            "inertia": list(self.inertia) if self.inertia is not None else None,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "FitResult":
        basis = HarmonicBasis(int(data["degree"]), bool(data.get("parity_ordered", False)))
        if [list(x) for x in data.get("ordering", basis.ordering_list())] != basis.ordering_list():
            raise ValueError("coefficient ordering does not match a known basis layout")
        inertia = data.get("inertia")
        return cls(np.array(data["coeffs"], dtype=float),
                   np.array(data.get("multipliers", []), dtype=float),
                   float(data.get("residual_norm", np.nan)),
                   float(data.get("constraint_defect", np.nan)),
                   data.get("path", "unknown"), basis,
                   data.get("orthogonality_defect"),
                   tuple(inertia) if inertia is not None else None)


# ---------------------------------------------------------------- KKT assembly

def kkt_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """[[A, B^T], [B, 0]] for a symmetric A (R x R) and B (M x R)."""
    R, M = A.shape[0], B.shape[0]
    K = np.zeros((R + M, R + M))
    K[:R, :R] = 0.5 * (A + A.T)
    K[R:, :R] = B
    K[:R, R:] = B.T
    return K


def _check_ranks(problem: FitProblem, stacklevel: int = 3) -> list[str]:
    """Warn on soft rank failures, raise RankDeficient on hard ones."""
    notes = []
    rep_N = rank_report(problem.V_N, problem.rank_threshold)
    if rep_N.sigma_max == 0 or rep_N.sigma_min < ABS_SIGMA_FLOOR * rep_N.sigma_max \
            or problem.V_N.rows < problem.R:
        raise RankDeficient(f"V_N has numerical rank {rep_N.numerical_rank} < R={problem.R}")
    if not rep_N.full_column_rank:
        notes.append(f"rank(V_N)={rep_N.numerical_rank} < R={problem.R} at threshold")
    if problem.M:
        rep_M = rank_report_from_matrix(problem.V_M, problem.rank_threshold)
        if problem.M > problem.R or rep_M.sigma_max == 0 \
                or rep_M.sigma_min < ABS_SIGMA_FLOOR * rep_M.sigma_max:
            raise RankDeficient(f"V_M has numerical rank {rep_M.numerical_rank} < M={problem.M}")
        if not rep_M.full_row_rank:
            notes.append(f"rank(V_M)={rep_M.numerical_rank} < M={problem.M} at threshold")
    for note in notes:
        warnings.warn(note, RankWarning, stacklevel=stacklevel)
    return notes


def assemble_kkt(problem: FitProblem) -> np.ndarray:
    """The (R+M) x (R+M) KKT matrix; warns (RankWarning) if a rank condition fails."""
    rep_N = rank_report(problem.V_N, problem.rank_threshold)
    if not rep_N.full_column_rank:
        warnings.warn(f"rank(V_N)={rep_N.numerical_rank} < R={problem.R}", RankWarning, stacklevel=2)
    if problem.M:
        rep_M = rank_report_from_matrix(problem.V_M, problem.rank_threshold)
        if not rep_M.full_row_rank:
            warnings.warn(f"rank(V_M)={rep_M.numerical_rank} < M={problem.M}", RankWarning,
                          stacklevel=2)
    V = problem.V_N.entries
    return kkt_matrix(V.T @ V, problem.V_M)


def kkt_inertia(K, rel_threshold: float = 1e-10) -> tuple[int, int, int]:
    """(n_plus, n_minus, n_zero) eigenvalue counts at threshold rel_threshold * ||K||_2."""
    K = np.asarray(K, dtype=float)
    if not np.allclose(K, K.T, rtol=0, atol=1e-14 * max(1.0, np.abs(K).max())):
        raise ValueError("KKT matrix must be symmetric")
    ev = np.linalg.eigvalsh(K)
    tol = rel_threshold * np.abs(ev).max(initial=0.0)
    return int(np.sum(ev > tol)), int(np.sum(ev < -tol)), int(np.sum(np.abs(ev) <= tol))


# ---------------------------------------------------------------- solution paths

def _finish(problem: FitProblem, c: np.ndarray, gamma: np.ndarray, path: str,
            notes: list[str]) -> FitResult:
    V = problem.V_N.entries
    resid = V @ c - problem.f_N
    defect = float(np.abs(problem.V_M @ c - problem.f_M).max()) if problem.M else 0.0
    return FitResult(c, gamma, float(np.linalg.norm(resid)), defect, path, problem.basis,
                     warnings=list(notes))


def _multipliers(problem: FitProblem, c: np.ndarray) -> np.ndarray:
    # first KKT block: V_N^T (V_N c - f_N) + V_M^T gamma = 0
    if not problem.M:
        return np.zeros(0)
    V = problem.V_N.entries
    rhs = V.T @ (problem.f_N - V @ c)
    return np.linalg.lstsq(problem.V_M.T, rhs, rcond=None)[0]


def _constrained_lstsq(A: np.ndarray, b: np.ndarray, B: np.ndarray, d: np.ndarray):
    """min ||A c - b|| s.t. B c = d via an SVD null-space basis of B."""
    R = A.shape[1]
    M = B.shape[0]
    if M == 0:
        return np.linalg.lstsq(A, b, rcond=None)[0]
    U, s, Wt = np.linalg.svd(B, full_matrices=True)
    c0 = Wt[:M].T @ ((U.T @ d) / s)
    if M == R:
        return c0
    Z = Wt[M:].T
    y = np.linalg.lstsq(A @ Z, b - A @ c0, rcond=None)[0]
    return c0 + Z @ y


def _solve_nullspace(problem: FitProblem, notes) -> FitResult:
    c = _constrained_lstsq(problem.V_N.entries, problem.f_N, problem.V_M, problem.f_M)
    return _finish(problem, c, _multipliers(problem, c), "nullspace", notes)


def _solve_kkt(problem: FitProblem, notes) -> FitResult:
    V = problem.V_N.entries
    K = kkt_matrix(V.T @ V, problem.V_M)
    rhs = np.concatenate([V.T @ problem.f_N, problem.f_M])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            sol = sla.solve(K, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, sla.LinAlgWarning) as exc:
        raise SingularKKT(f"KKT factorization failed: {exc}") from exc
    R = problem.R
    return _finish(problem, sol[:R], sol[R:], "kkt-direct", notes)


def _solve_design(problem: FitProblem, notes) -> FitResult:
    alpha = problem.design_alpha
    if alpha is None or alpha <= 0:
        raise ValueError("design path needs design_alpha = N/(4 pi) > 0")
    V = problem.V_N.entries
    b = V.T @ problem.f_N
    if not problem.M:
        c = b / alpha
        return _finish(problem, c, np.zeros(0), "design", notes)
    B = problem.V_M
    # alpha c + B^T g = b,  B c = f_M  =>  (B B^T / alpha) g = B b / alpha - f_M
    S = (B @ B.T) / alpha
    try:
        gamma = sla.cho_solve(sla.cho_factor(S), B @ b / alpha - problem.f_M)
    except np.linalg.LinAlgError as exc:
        raise SingularKKT(f"Schur complement is not positive definite: {exc}") from exc
    c = (b - B.T @ gamma) / alpha
    return _finish(problem, c, gamma, "design", notes)


def split_parity_data(f_N, partner) -> tuple[np.ndarray, np.ndarray]:
    """f+ = (f(x) + f(-x))/2 and f- = (f(x) - f(-x))/2 on an antipodal node set."""
    f_N = np.asarray(f_N, dtype=float)
    f_star = f_N[partner]
    return 0.5 * (f_N + f_star), 0.5 * (f_N - f_star)


def _parity_layout(problem: FitProblem):
    nodes = problem.V_N.nodes
    if nodes is None or nodes.pairing is None:
        raise NotAntipodal("parity path needs antipodally paired sampling nodes")
    if not problem.basis.parity_ordered:
        raise ValueError("parity path needs a parity-ordered basis")
    partner = nodes.antipodal_partner()
    rows = problem.constraint_rows
    if not set(partner[rows].tolist()) <= set(rows.tolist()):
        raise NotAntipodal("constraint set is not antipodally symmetric")
    # one representative per constraint pair
    reps = np.array(sorted({min(int(i), int(partner[i])) for i in rows}), dtype=int)
    return partner, reps


def solve_parity(problem: FitProblem) -> FitResult:
    """Solve the even and odd reduced problems separately and concatenate."""
    partner, reps = _parity_layout(problem)
    notes = _check_ranks(problem)
    V = problem.V_N.entries
    ev, od = problem.basis.even_indices, problem.basis.odd_indices
    f_plus, f_minus = split_parity_data(problem.f_N, partner)
    c = np.zeros(problem.R)
    c[ev] = _constrained_lstsq(V[:, ev], f_plus, V[reps][:, ev], f_plus[reps])
    c[od] = _constrained_lstsq(V[:, od], f_minus, V[reps][:, od], f_minus[reps])
    return _finish(problem, c, _multipliers(problem, c), "parity", notes)


def solve(problem: FitProblem, certify: bool = True) -> FitResult:
    """Solve the constrained problem along ``problem.path``.

    ``auto`` picks ``design`` when a design alpha is supplied and ``nullspace``
    otherwise. With ``certify`` the orthogonality defect is filled in.
    """
    path = problem.path
    if path == "auto":
        path = "design" if problem.design_alpha is not None else "nullspace"
    if path == "parity":
        result = solve_parity(problem)
    else:
        notes = _check_ranks(problem)
        if path == "nullspace":
            result = _solve_nullspace(problem, notes)
        elif path == "kkt-direct":
            result = _solve_kkt(problem, notes)
        elif path == "design":
            result = _solve_design(problem, notes)
        else:
            raise ValueError(f"unknown solver path {path!r}")
    if certify:
        result.orthogonality_defect = certify_orthogonality(problem, result)
    return result


def null_space_basis(B: np.ndarray, R: int) -> np.ndarray:
    """Orthonormal basis (R x (R-M)) of {c : B c = 0} for a full-row-rank B."""
    if B.shape[0] == 0:
        return np.eye(R)
    _, s, Wt = np.linalg.svd(B, full_matrices=True)
    rank = int(np.count_nonzero(s > ABS_SIGMA_FLOOR * s[0])) if s.size else 0
    return Wt[rank:].T


def certify_orthogonality(problem: FitProblem, result: FitResult) -> float:
    """max_q |<p_hat - f, q>_X| / (max(||p_hat - f||, tau ||f||) ||q||_X) over a basis of V_{r,M}.

    V_{r,M} is the set of degree-r polynomials vanishing on X_M. The floor
    tau = RESIDUAL_FLOOR keeps the ratio meaningful when the data are
    reproduced to rounding level; it returns 0 when V_{r,M} is trivial or f = 0.
    """
    V = problem.V_N.entries
    Z = null_space_basis(problem.V_M, problem.R)
    fnorm = np.linalg.norm(problem.f_N)
    if Z.shape[1] == 0 or fnorm == 0:
        return 0.0
    resid = V @ result.coeffs - problem.f_N
    denom = max(np.linalg.norm(resid), RESIDUAL_FLOOR * fnorm)
    VZ = V @ Z
    qnorm = np.linalg.norm(VZ, axis=0)
    qnorm[qnorm == 0] = np.inf
    return float(np.max(np.abs(resid @ VZ) / (denom * qnorm)))


def evaluate_fit(result: FitResult, points, basis: HarmonicBasis | None = None) -> np.ndarray:
    """p_hat(y) = sum_j c_j b_j(y) at each point."""
    basis = basis or result.basis
    if result.coeffs.shape != (basis.size,):
        raise ValueError("coefficient vector does not match the basis")
    return eval_basis(basis, points) @ result.coeffs


# ---------------------------------------------------------------- design spectrum

@dataclass
class SpectrumReport:
    alpha: float
    R: int
    M: int
    mu: np.ndarray
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    singular_values: np.ndarray
    eigenvalues_formula: np.ndarray
    eigenvalues_numeric: np.ndarray
    alpha_multiplicity_numeric: int
    kappa2_formula: float
    kappa2_numeric: float

    @property
    def max_eig_rel_error(self) -> float:
        scale = np.abs(self.eigenvalues_numeric).max()
        return float(np.abs(self.eigenvalues_formula - self.eigenvalues_numeric).max() / scale)

    @property
    def kappa2_rel_error(self) -> float:
        return abs(self.kappa2_formula - self.kappa2_numeric) / self.kappa2_numeric

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "alpha": self.alpha, "R": self.R, "M": self.M,
            "mu": self.mu.tolist(),
            "lambda_plus": self.lambda_plus.tolist(),
            "lambda_minus": self.lambda_minus.tolist(),
            "alpha_multiplicity": self.R - self.M,
            "alpha_multiplicity_numeric": self.alpha_multiplicity_numeric,
            "singular_values": self.singular_values.tolist(),
            "kappa2_formula": self.kappa2_formula,
            "kappa2_numeric": self.kappa2_numeric,
        }


def design_spectrum(alpha: float, V_M, rank_threshold: float = RANK_THRESHOLD) -> SpectrumReport:
    """Closed-form spectrum of [[alpha I, V_M^T], [V_M, 0]] next to a numerical one.

    Eigenvalues are alpha (multiplicity R - M) and
    (alpha +- sqrt(alpha^2 + 4 alpha mu_j)) / 2 with mu_j = sigma_j(V_M)^2 / alpha.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    V_M = np.atleast_2d(np.asarray(V_M, dtype=float))
    M, R = V_M.shape
    sigma = np.linalg.svd(V_M, compute_uv=False)
    if M > R or sigma[-1] < rank_threshold * sigma[0]:
        raise RankDeficient(f"V_M must have full row rank M={M}")
    mu = sigma**2 / alpha
    root = np.sqrt(alpha**2 + 4.0 * alpha * mu)
    lam_p = (alpha + root) / 2.0
    lam_m = (alpha - root) / 2.0
    sv_root = np.sqrt(alpha**2 + 4.0 * sigma**2)
    svals = np.sort(np.concatenate([np.full(R - M, alpha), (alpha + sv_root) / 2.0,
                                    (sv_root - alpha) / 2.0]))[::-1]
    kappa_f = ((alpha + np.sqrt(alpha**2 + 4.0 * sigma[0] ** 2)) / 2.0
               / min(alpha, (np.sqrt(alpha**2 + 4.0 * sigma[-1] ** 2) - alpha) / 2.0))
    eig_f = np.sort(np.concatenate([np.full(R - M, alpha), lam_p, lam_m]))
    K = kkt_matrix(alpha * np.eye(R), V_M)
    eig_n = np.linalg.eigvalsh(K)
    kappa_n = np.abs(eig_n).max() / np.abs(eig_n).min()
    mult = int(np.sum(np.abs(eig_n - alpha) <= 1e-8 * alpha))
    return SpectrumReport(alpha, R, M, mu, lam_p, lam_m, svals, eig_f, eig_n, mult,
                          float(kappa_f), float(kappa_n))


def design_alpha(nodes: NodeSet) -> float:
    return len(nodes) / FOUR_PI

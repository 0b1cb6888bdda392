"""Interpolation-subset selection.

``antipodal_select`` grows a set J of antipodal pairs while both reduced
parity matrices keep full row rank, then trims J to (m+1)^2 / 2 pairs for the
largest admissible m. ``approximate_fekete`` picks rows of a Vandermonde
matrix by column-pivoted QR of its transpose.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import RankDeficient
from .harmonics import HarmonicBasis, eval_basis
from .nodes import DUPLICATE_TOL, NodeSet, antipodal_complete
from .vandermonde import RANK_THRESHOLD, RankReport, rank_report_from_matrix, singular_values

TIE_TOL = 1e-12
SCHEMA = "spherefit/1"


@dataclass(frozen=True)
class PairSystem:
    """Reduced even/odd rows for the base indices J."""

    J: tuple[int, ...]
    reduced_even: np.ndarray
    reduced_odd: np.ndarray

    @property
    def sigma_min_even(self) -> float:
        s = singular_values(self.reduced_even)
        return float(s[-1]) if s.size else np.inf

    @property
    def sigma_min_odd(self) -> float:
        s = singular_values(self.reduced_odd)
        return float(s[-1]) if s.size else np.inf

    def full_matrix(self) -> np.ndarray:
        """[[V+, V-], [V+, -V-]]: rows for x_j (j in J) followed by rows for -x_j."""
        return np.block([[self.reduced_even, self.reduced_odd],
                         [self.reduced_even, -self.reduced_odd]])


def pair_system(base_vandermonde: np.ndarray, basis: HarmonicBasis, J) -> PairSystem:
    J = tuple(int(j) for j in J)
    rows = base_vandermonde[list(J)]
    return PairSystem(J, rows[:, basis.even_indices], rows[:, basis.odd_indices])


def pair_rank_additivity_check(sys: PairSystem, rel_threshold: float = RANK_THRESHOLD) -> bool:
    """True when J is an admissible pair system: rank(full) = rank(V+) + rank(V-) = 2|J|."""
    K = len(sys.J)
    if K == 0:
        return True
    r_full = rank_report_from_matrix(sys.full_matrix(), rel_threshold).numerical_rank
    r_even = rank_report_from_matrix(sys.reduced_even, rel_threshold).numerical_rank
    r_odd = rank_report_from_matrix(sys.reduced_odd, rel_threshold).numerical_rank
    return r_full == r_even + r_odd == 2 * K


@dataclass
class SelectionResult:
    """Chosen interpolation subset.

    ``indices`` point into ``nodes`` (the full sampling set the selector ran
    on); ``subset`` holds the corresponding points.
    """

    nodes: NodeSet
    indices: list[int]
    m: int | None
    rank_certificate: RankReport | None
    history: list[dict] = field(default_factory=list)
    base_indices: list[int] | None = None
    K_max: int | None = None

    @property
    def M(self) -> int:
        return len(self.indices)

    @property
    def subset(self) -> NodeSet:
        if not self.indices:
            return NodeSet(np.zeros((0, 3)), "empty")
        return self.nodes.subset(self.indices, label=f"{self.nodes.label}-subset")

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "indices": [int(i) for i in self.indices],
            "m": self.m,
            "M": self.M,
            "K_max": self.K_max,
            "subset": self.nodes.points[self.indices].tolist() if self.indices else [],
            "sigma_history": [
                {k: v for k, v in step.items() if k != "J"} for step in self.history
            ],
            "rank_certificate": (self.rank_certificate.to_dict()
                                 if self.rank_certificate is not None else None),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def admissible_degrees(M_max: int, r: int) -> list[int]:
    """{s >= 0 : (s+1)^2 <= M_max, s < r, (s+1)^2 even}."""
    return [s for s in range(r) if (s + 1) ** 2 <= M_max and (s + 1) ** 2 % 2 == 0]


def appended_sigma_min(A: np.ndarray, rows: np.ndarray, iters: int = 200) -> np.ndarray:
    """sigma_min([A; v]) for every candidate row v in ``rows``; A must have full row rank.

    With A^T = Q R and R = U S W^T, the stacked matrix shares its singular values
    with the (K+1)-square T = [[R^T, 0], [w^T, rho]] (w = Q^T v, rho = |v - Q w|).
    sigma_min(T)^-2 is the largest eigenvalue of T^-1 T^-T, an arrowhead matrix
    diag(1/S^2) bordered by u = -(U^T w) / (S^2 rho) with corner
    (1 + sum (U^T w)^2 / S^2) / rho^2; its top root is bracketed and bisected.
    """
    rows = np.atleast_2d(rows)
    if A.shape[0] == 0:
        return np.linalg.norm(rows, axis=1)
    Q, R = np.linalg.qr(A.T)
    U, S, _ = np.linalg.svd(R)
    QU = Q @ U
    g = rows @ QU
    rho = np.linalg.norm(rows - g @ QU.T, axis=1)
    out = np.zeros(rows.shape[0])
    live = rho > 0
    if not live.any():
        return out
    g, rho = g[live], rho[live]
    d = 1.0 / S**2
    u = -g / (S**2 * rho[:, None])
    c = (1.0 + np.sum(g**2 / S**2, axis=1)) / rho**2
    lo = np.maximum(d.max(), c)
    hi = lo + np.linalg.norm(u, axis=1)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        with np.errstate(divide="ignore"):
            f = mid - c - np.sum(u**2 / (mid[:, None] - d), axis=1)
        neg = f < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * hi):
            break
    out[live] = 1.0 / np.sqrt(hi)
    return out


def _exact_full_row_rank(A: np.ndarray, rel_threshold: float) -> tuple[bool, float]:
    s = singular_values(A)
    return bool(s[0] > 0 and s[-1] >= rel_threshold * s[0]), float(s[-1])


def _full_row_rank(s_min, s_max, rel_threshold):
    return (s_max > 0) & (s_min >= rel_threshold * s_max)


def _pick(scores: np.ndarray, candidates: np.ndarray):
    # lowest base index among scores within TIE_TOL of the best
    best = scores.max()
    ties = candidates[scores >= best - TIE_TOL * max(1.0, abs(best))]
    return int(ties.min())


def antipodal_select(X_base: NodeSet, r: int, rel_threshold: float = RANK_THRESHOLD,
                     candidate_cap: int | None = None,
                     tol: float = DUPLICATE_TOL) -> SelectionResult:
    """Constructive antipodal selection on the completion X_base cup (-X_base).

    Step 1 adds pairs greedily: a base index j is admissible when appending its
    even row and its odd row raises both reduced ranks by one; the admissible j
    maximizing min(sigma_min(V+_J), sigma_min(V-_J)) after the append wins
    (ties go to the lowest index). Step 2 takes m = max{s < r : (s+1)^2 <= 2|J|,
    (s+1)^2 even} and removes pairs one at a time, keeping both reduced matrices
    at full row rank and maximizing the same objective, until (m+1)^2 / 2 pairs
    remain. With no admissible m the subset is empty.

    The returned ``indices`` refer to the completed set, where base point j sits
    at row j and its antipode at row j + len(X_base). ``candidate_cap`` limits
    each greedy step to that many candidates of largest row norm.
    """
    completed = antipodal_complete(X_base, tol)
    basis = HarmonicBasis(r, parity_ordered=True)
    Vb = eval_basis(basis, X_base.points)
    Vp, Vm = Vb[:, basis.even_indices], Vb[:, basis.odd_indices]
    n_base = len(X_base)
    R_plus, R_minus = Vp.shape[1], Vm.shape[1]
    J: list[int] = []
    history: list[dict] = []

    # Step 1: greedy growth
    while len(J) < min(R_plus, R_minus):
        cand = np.setdiff1d(np.arange(n_base), J)
        if candidate_cap is not None and cand.size > candidate_cap:
            norms = np.linalg.norm(Vb[cand], axis=1)
            cand = np.sort(cand[np.argsort(-norms, kind="stable")[:candidate_cap]])
        if cand.size == 0:
            break
        smin_p = appended_sigma_min(Vp[J], Vp[cand])
        smin_m = appended_sigma_min(Vm[J], Vm[cand])
        # sigma_max of the appended matrix lies in [sigma_max(A), sqrt(sigma_max(A)^2 + |v|^2)]
        smax_p = np.sqrt(singular_values(Vp[J]).max(initial=0.0) ** 2
                         + np.sum(Vp[cand] ** 2, axis=1))
        smax_m = np.sqrt(singular_values(Vm[J]).max(initial=0.0) ** 2
                         + np.sum(Vm[cand] ** 2, axis=1))
        ok = (_full_row_rank(smin_p, smax_p, rel_threshold)
              & _full_row_rank(smin_m, smax_m, rel_threshold))
        chosen = None
        while ok.any():
            score = np.minimum(smin_p, smin_m)
            j = _pick(score[ok], cand[ok])
            k = int(np.flatnonzero(cand == j)[0])
            # confirm the winner with a direct SVD before accepting it
            ok_p, sp = _exact_full_row_rank(Vp[J + [j]], rel_threshold)
            ok_m, sm = _exact_full_row_rank(Vm[J + [j]], rel_threshold)
            if ok_p and ok_m:
                chosen = (j, sp, sm)
                break
            ok[k] = False
        if chosen is None:
            break
        j, sp, sm = chosen
        J.append(j)
        history.append({"step": len(history) + 1, "action": "add", "index": j,
                        "K": len(J), "sigma_even": sp, "sigma_odd": sm, "J": tuple(J)})

    K_max = len(J)
    S = admissible_degrees(2 * K_max, r)
    if not S:
        return SelectionResult(completed, [], None, None, history, [], K_max)
    m = max(S)
    K_target = (m + 1) ** 2 // 2

    # Step 2: greedy removal
    while len(J) > K_target:
        best_score, best_j, best_sig = -np.inf, None, None
        for j in sorted(J):
            rest = [i for i in J if i != j]
            sp = singular_values(Vp[rest])
            sm = singular_values(Vm[rest])
            if not (_full_row_rank(sp[-1], sp[0], rel_threshold)
                    and _full_row_rank(sm[-1], sm[0], rel_threshold)):
                continue
            score = min(sp[-1], sm[-1])
            if best_j is None or score > best_score + TIE_TOL * max(1.0, abs(best_score)):
                best_score, best_j, best_sig = score, j, (float(sp[-1]), float(sm[-1]))
        if best_j is None:
            raise RankDeficient("no pair can be removed while keeping full row rank")
        J.remove(best_j)
        history.append({"step": len(history) + 1, "action": "remove", "index": best_j,
                        "K": len(J), "sigma_even": best_sig[0], "sigma_odd": best_sig[1],
                        "J": tuple(J)})

    J_sorted = sorted(J)
    indices = J_sorted + [j + n_base for j in J_sorted]
    full_basis = HarmonicBasis(r)
    cert = rank_report_from_matrix(eval_basis(full_basis, completed.points[indices]),
                                   rel_threshold)
    return SelectionResult(completed, indices, m, cert, history, J_sorted, K_max)


def approximate_fekete(V, M: int, rel_threshold: float = RANK_THRESHOLD) -> np.ndarray:
    """Greedy volume maximization: the first M pivots of a column-pivoted QR of V^T.

    ``V`` is an N x R_m Vandermonde array (or VandermondeMatrix) for the
    interpolation degree. Returns M row indices in pivot order.
    """
    A = getattr(V, "entries", V)
    A = np.asarray(A, dtype=float)
    rep = rank_report_from_matrix(A, rel_threshold)
    if M > rep.numerical_rank:
        raise RankDeficient(f"cannot select {M} rows from a matrix of rank {rep.numerical_rank}")
    if M == 0:
        return np.zeros(0, dtype=int)
    _, _, piv = sla.qr(A.T, mode="economic", pivoting=True)
    return np.asarray(piv[:M], dtype=int)


def fekete_select(X: NodeSet, m: int, r: int | None = None,
                  rel_threshold: float = RANK_THRESHOLD) -> SelectionResult:
    """Approximate Fekete subset of size (m+1)^2 for degree-m interpolation.

    The subset is chosen with the degree-m Vandermonde matrix and then
    re-checked for rank M against the degree-r matrix when ``r`` is given.
    """
    M = (m + 1) ** 2
    idx = approximate_fekete(eval_basis(HarmonicBasis(m), X.points), M, rel_threshold)
    check_basis = HarmonicBasis(r if r is not None else m)
    cert = rank_report_from_matrix(eval_basis(check_basis, X.points[idx]), rel_threshold)
    if cert.numerical_rank != M:
        raise RankDeficient(f"Fekete subset has rank {cert.numerical_rank} < M={M}")
    return SelectionResult(X, [int(i) for i in idx], m, cert)

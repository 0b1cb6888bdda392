"""Spherical Vandermonde matrices, parity blocks and SVD-based rank diagnostics."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NotAntipodal
from .harmonics import HarmonicBasis, eval_basis
from .nodes import NodeSet

RANK_THRESHOLD = 1e-10


@dataclass(frozen=True)
class RankReport:
    numerical_rank: int
    sigma_max: float
    sigma_min: float
    rel_threshold: float
    condition_number: float
    full_column_rank: bool
    full_row_rank: bool

    def to_dict(self) -> dict:
        cond = self.condition_number
        return {
            "numerical_rank": self.numerical_rank,
            "sigma_max": self.sigma_max,
            "sigma_min": self.sigma_min,
            "rel_threshold": self.rel_threshold,
            "condition_number": cond if np.isfinite(cond) else None,
        }


def singular_values(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.zeros(0)
    return np.linalg.svd(A, compute_uv=False)


def numerical_rank(sigma: np.ndarray, rel_threshold: float = RANK_THRESHOLD) -> int:
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.count_nonzero(sigma >= rel_threshold * sigma[0]))


def rank_report_from_matrix(A, rel_threshold: float = RANK_THRESHOLD) -> RankReport:
    A = np.asarray(A, dtype=float)
    sigma = singular_values(A)
    return _report(sigma, A.shape, rel_threshold)


def _report(sigma: np.ndarray, shape, rel_threshold: float) -> RankReport:
    rank = numerical_rank(sigma, rel_threshold)
    smax = float(sigma[0]) if sigma.size else 0.0
    smin = float(sigma[-1]) if sigma.size else 0.0
    # kappa_2 = sigma_1 / sigma_rank when the matrix has full rank min(N, R); otherwise inf
    full = sigma.size > 0 and rank == min(shape)
    cond = smax / smin if full and smin > 0 else np.inf
    return RankReport(rank, smax, smin, rel_threshold, float(cond),
                      rank == shape[1], rank == shape[0])


@dataclass(eq=False)
class VandermondeMatrix:
    """Dense N x R matrix [b_j(x_i)] with lazily cached singular values."""

    entries: np.ndarray
    basis: HarmonicBasis
    nodes: NodeSet | None = None
    _sigma: np.ndarray | None = field(default=None, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        self.entries.setflags(write=False)
        if self.entries.ndim != 2 or self.entries.shape[1] != self.basis.size:
            raise ValueError("entries must be N x R for the given basis")

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    @property
    def singular_values(self) -> np.ndarray:
        if self._sigma is None:
            with self._lock:
                if self._sigma is None:
                    self._sigma = singular_values(self.entries)
        return self._sigma

    @property
    def even_block(self) -> np.ndarray | None:
        if not self.basis.parity_ordered:
            return None
        return self.entries[:, self.basis.even_indices]

    @property
    def odd_block(self) -> np.ndarray | None:
        if not self.basis.parity_ordered:
            return None
        return self.entries[:, self.basis.odd_indices]

    def rows_subset(self, indices) -> "VandermondeMatrix":
        indices = np.asarray(indices, dtype=int)
        sub_nodes = self.nodes.subset(indices) if self.nodes is not None else None
        return VandermondeMatrix(self.entries[indices], self.basis, sub_nodes)

    def to_csv(self, path) -> None:
        Path(path).write_text("".join(",".join(f"{v:.17g}" for v in row) + "\n"
                                      for row in self.entries))


def assemble(X: NodeSet, basis: HarmonicBasis) -> VandermondeMatrix:
    if len(X) == 0:
        raise ValueError("node set is empty")
    return VandermondeMatrix(eval_basis(basis, X.points), basis, X)


def rank_report(V: VandermondeMatrix, rel_threshold: float = RANK_THRESHOLD) -> RankReport:
    return _report(V.singular_values, V.shape, rel_threshold)


def discrete_inner(p_coeffs, q_coeffs, V: VandermondeMatrix) -> float:
    """<p, q>_X = sum_i p(x_i) q(x_i) for coefficient vectors p, q."""
    p = np.asarray(p_coeffs, dtype=float)
    q = np.asarray(q_coeffs, dtype=float)
    if p.shape != (V.cols,) or q.shape != (V.cols,):
        raise ValueError(f"coefficient vectors must have length {V.cols}")
    return float((V.entries @ p) @ (V.entries @ q))


def discrete_norm(p_coeffs, V: VandermondeMatrix) -> float:
    return float(np.sqrt(max(discrete_inner(p_coeffs, p_coeffs, V), 0.0)))


@dataclass(frozen=True)
class SplitSpectrum:
    sigma_even: np.ndarray
    sigma_odd: np.ndarray
    kappa2: float
    kappa2_direct: float


def parity_split_spectrum(V: VandermondeMatrix, rtol: float = 1e-9) -> SplitSpectrum:
    """Block singular values of [V+ V-] on an antipodal node set.

    On such a set V+^T V- = 0, so the singular values of V are the union of
    the block singular values (keeping the largest min(N, R) of them). A
    mismatch beyond ``rtol`` raises AssertionError.
    """
    if V.nodes is None or V.nodes.pairing is None:
        raise NotAntipodal("Vandermonde nodes carry no antipodal pairing")
    if not V.basis.parity_ordered:
        raise ValueError("basis must be parity-ordered")
    s_even = singular_values(V.even_block)
    s_odd = singular_values(V.odd_block)
    full = V.singular_values
    merged = np.sort(np.concatenate([s_even, s_odd]))[::-1][: full.size]
    if np.any(np.abs(merged - full) > rtol * full + 1e-14 * full[0]):
        raise AssertionError("singular values do not split over parity blocks")
    smax, smin = merged[0], merged[-1]
    kappa = smax / smin if smin > 0 else np.inf
    direct = full[0] / full[-1] if full[-1] > 0 else np.inf
    return SplitSpectrum(s_even, s_odd, float(kappa), float(direct))

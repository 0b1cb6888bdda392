"""Associated Legendre functions and the orthonormal real spherical harmonic basis.

Sign convention: associated Legendre functions are evaluated WITHOUT the
Condon-Shortley phase, so P_l^m(cos phi) >= 0 for 0 < phi < pi and l = m.
The real harmonics are

    u_{l,m}  = sqrt(2) N_{l,m}   P_l^m(cos phi)   cos(m theta),   m > 0
    u_{l,0}  =         N_{l,0}   P_l^0(cos phi)
    u_{l,-m} = sqrt(2) N_{l,m}   P_l^m(cos phi)   sin(m theta),   m > 0

with N_{l,m} = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!), phi the polar angle from +z
and theta the azimuth from +x.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

FOUR_PI = 4.0 * np.pi
Y00 = 1.0 / np.sqrt(FOUR_PI)


@dataclass(frozen=True)
class SphPoint:
    """Unit vector on S^2. The constructor normalizes its input."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        nrm = float(np.sqrt(self.x**2 + self.y**2 + self.z**2))
        if nrm == 0.0 or not np.isfinite(nrm):
            raise ValueError("cannot normalize a zero or non-finite vector")
        object.__setattr__(self, "x", float(self.x) / nrm)
        object.__setattr__(self, "y", float(self.y) / nrm)
        object.__setattr__(self, "z", float(self.z) / nrm)

    @classmethod
    def from_angles(cls, phi: float, theta: float) -> "SphPoint":
        s = np.sin(phi)
        return cls(s * np.cos(theta), s * np.sin(theta), np.cos(phi))

    @property
    def phi(self) -> float:
        return float(np.arccos(np.clip(self.z, -1.0, 1.0)))

    @property
    def theta(self) -> float:
        # theta is undefined at the poles; atan2(0, 0) = 0 there
        return float(np.mod(np.arctan2(self.y, self.x), 2 * np.pi))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def __neg__(self) -> "SphPoint":
        return SphPoint(-self.x, -self.y, -self.z)


@dataclass(frozen=True, order=True)
class HarmonicIndex:
    ell: int
    m: int

    def __post_init__(self):
        if self.ell < 0 or abs(self.m) > self.ell:
            raise ValueError(f"invalid harmonic index (ell={self.ell}, m={self.m})")


def harmonic_counts(degree: int) -> tuple[int, int]:
    """Return (R+, R-): dimensions of the even and odd degree parts of Pi_r."""
    even = sum(2 * ell + 1 for ell in range(0, degree + 1, 2))
    odd = sum(2 * ell + 1 for ell in range(1, degree + 1, 2))
    return even, odd


@dataclass(frozen=True)
class HarmonicBasis:
    """Real spherical harmonics of degree <= ``degree`` in a fixed column order.

    Natural order lists degrees ascending and, within a degree, m from -l to l.
    With ``parity_ordered=True`` every even-degree function precedes every
    odd-degree one (each group keeps the natural order internally).
    """

    degree: int
    parity_ordered: bool = False
    ordering: tuple[HarmonicIndex, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        natural = [HarmonicIndex(ell, m) for ell in range(self.degree + 1)
                   for m in range(-ell, ell + 1)]
        if self.parity_ordered:
            natural = ([h for h in natural if h.ell % 2 == 0]
                       + [h for h in natural if h.ell % 2 == 1])
        object.__setattr__(self, "ordering", tuple(natural))

    @property
    def size(self) -> int:
        return (self.degree + 1) ** 2

    def __len__(self) -> int:
        return self.size

    @cached_property
    def even_indices(self) -> np.ndarray:
        return np.array([j for j, h in enumerate(self.ordering) if h.ell % 2 == 0], dtype=int)

    @cached_property
    def odd_indices(self) -> np.ndarray:
        return np.array([j for j, h in enumerate(self.ordering) if h.ell % 2 == 1], dtype=int)

    @cached_property
    def position(self) -> dict[HarmonicIndex, int]:
        return {h: j for j, h in enumerate(self.ordering)}

    def index_of(self, ell: int, m: int) -> int:
        return self.position[HarmonicIndex(ell, m)]

    def embed(self, coeffs, source: "HarmonicBasis") -> np.ndarray:
        """Re-express coefficients given in ``source`` (degree <= self.degree) in this basis."""
        coeffs = np.asarray(coeffs, dtype=float)
        if source.degree > self.degree or coeffs.shape != (source.size,):
            raise ValueError("source basis does not embed into this basis")
        out = np.zeros(self.size)
        for j, h in enumerate(source.ordering):
            out[self.position[h]] = coeffs[j]
        return out

    def ordering_list(self) -> list[list[int]]:
        return [[h.ell, h.m] for h in self.ordering]


def assoc_legendre(ell: int, m: int, t: float) -> float:
    """Unnormalized P_l^m(t) without the Condon-Shortley phase.

    Three-term recurrence in l seeded with P_m^m = (2m-1)!! (1-t^2)^(m/2).
    Intended for moderate degrees; the basis evaluator uses a normalized
    recurrence that stays finite for large l.
    """
    if m < 0 or m > ell:
        raise ValueError(f"need 0 <= m <= ell, got ell={ell}, m={m}")
    if abs(t) > 1.0 + 1e-14:
        raise ValueError(f"argument {t} outside [-1, 1]")
    t = min(1.0, max(-1.0, float(t)))
    s = np.sqrt((1.0 - t) * (1.0 + t))
    pmm = 1.0
    for k in range(1, m + 1):
        pmm *= (2 * k - 1) * s
    if ell == m:
        return pmm
    pm1 = t * (2 * m + 1) * pmm
    if ell == m + 1:
        return pm1
    p_prev, p_cur = pmm, pm1
    for k in range(m + 2, ell + 1):
        p_prev, p_cur = p_cur, ((2 * k - 1) * t * p_cur - (k + m - 1) * p_prev) / (k - m)
    return p_cur


def norm_factor(ell: int, m: int) -> float:
    """N_{l,m} with the factorial ratio (l-m)!/(l+m)! built as a running product."""
    m = abs(m)
    ratio = 1.0
    for k in range(ell - m + 1, ell + m + 1):
        ratio /= k
    return float(np.sqrt((2 * ell + 1) / FOUR_PI * ratio))


def _as_xyz(points) -> np.ndarray:
    if isinstance(points, SphPoint):
        return points.as_array()[None, :]
    if hasattr(points, "points") and not isinstance(points, np.ndarray):
        points = points.points
    if isinstance(points, (list, tuple)) and points and isinstance(points[0], SphPoint):
        return np.array([p.as_array() for p in points])
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[-1] != 3:
        raise ValueError("points must have shape (N, 3)")
    return arr


def _normalized_legendre_table(degree: int, t: np.ndarray, s: np.ndarray) -> dict:
    """Q[l, m] = N_{l,m} P_l^m(t) for 0 <= m <= l <= degree, as arrays over points."""
    table = {}
    qmm = np.full_like(t, 1.0 / np.sqrt(FOUR_PI))
    for m in range(degree + 1):
        if m > 0:
            qmm = qmm * np.sqrt((2 * m + 1) / (2.0 * m)) * s
        table[m, m] = qmm
        if m + 1 > degree:
            continue
        q_prev, q_cur = qmm, np.sqrt(2 * m + 3.0) * t * qmm
        table[m + 1, m] = q_cur
        for ell in range(m + 2, degree + 1):
            a = np.sqrt((4.0 * ell * ell - 1) / (ell * ell - m * m))
            b = np.sqrt(((ell - 1.0) ** 2 - m * m) / (4.0 * (ell - 1) ** 2 - 1))
            q_prev, q_cur = q_cur, a * (t * q_cur - b * q_prev)
            table[ell, m] = q_cur
    return table


def eval_basis(basis: HarmonicBasis, points) -> np.ndarray:
    """Evaluate every basis function at every point; returns an (N, R) array."""
    xyz = _as_xyz(points)
    nrm = np.linalg.norm(xyz, axis=1)
    xyz = xyz / nrm[:, None]
    t = np.clip(xyz[:, 2], -1.0, 1.0)
    rho = np.hypot(xyz[:, 0], xyz[:, 1])
    s = rho
    # azimuth via cos/sin directly; at the poles rho = 0 and theta := 0
    safe = rho > 0
    cos_t = np.where(safe, xyz[:, 0] / np.where(safe, rho, 1.0), 1.0)
    sin_t = np.where(safe, xyz[:, 1] / np.where(safe, rho, 1.0), 0.0)
    r = basis.degree
    table = _normalized_legendre_table(r, t, s)
    cos_m = [np.ones_like(t)]
    sin_m = [np.zeros_like(t)]
    for _ in range(r):
        c, sn = cos_m[-1], sin_m[-1]
        cos_m.append(c * cos_t - sn * sin_t)
        sin_m.append(sn * cos_t + c * sin_t)
    out = np.empty((xyz.shape[0], basis.size))
    sqrt2 = np.sqrt(2.0)
    for j, h in enumerate(basis.ordering):
        am = abs(h.m)
        q = table[h.ell, am]
        if h.m > 0:
            out[:, j] = sqrt2 * q * cos_m[am]
        elif h.m < 0:
            out[:, j] = sqrt2 * q * sin_m[am]
        else:
            out[:, j] = q
    return out


def eval_basis_row(basis: HarmonicBasis, p) -> np.ndarray:
    return eval_basis(basis, p)[0]


def eval_harmonic(idx: HarmonicIndex, p) -> float:
    """u_{l,m}(p) evaluated straight from the defining formula."""
    if not isinstance(p, SphPoint):
        p = SphPoint(*np.asarray(p, dtype=float))
    am = abs(idx.m)
    val = norm_factor(idx.ell, am) * assoc_legendre(idx.ell, am, p.z)
    if idx.m > 0:
        return float(np.sqrt(2.0) * val * np.cos(am * p.theta))
    if idx.m < 0:
        return float(np.sqrt(2.0) * val * np.sin(am * p.theta))
    return float(val)

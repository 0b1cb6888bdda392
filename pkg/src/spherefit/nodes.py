"""Node sets on the unit sphere: generators, antipodal completion, file I/O, design checks."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import AntipodalCollision, NotAntipodal, OffSphereError, ParseError
from .harmonics import HarmonicBasis, SphPoint, eval_basis

DUPLICATE_TOL = 1e-10
OFF_SPHERE_TOL = 1e-6
GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Immutable ordered set of unit vectors, stored as an (N, 3) array.

    ``pairing`` is an optional tuple of index pairs (j, j') with
    points[j'] = -points[j], covering every index exactly once.
    """

    points: np.ndarray
    label: str = ""
    pairing: tuple[tuple[int, int], ...] | None = None
    tol: float = field(default=DUPLICATE_TOL, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1 and pts.size == 3:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must have shape (N, 3)")
        nrm = np.linalg.norm(pts, axis=1)
        if np.any(nrm == 0) or not np.all(np.isfinite(nrm)):
            raise ValueError("points must be finite and nonzero")
        pts = pts / nrm[:, None]
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if len(pts) > 1:
            dist, _ = cKDTree(pts).query(pts, k=2)
            if np.any(dist[:, 1] <= self.tol):
                raise ValueError("node set contains duplicate points")
        if self.pairing is not None:
            pairing = tuple((int(a), int(b)) for a, b in self.pairing)
            covered = sorted(i for pair in pairing for i in pair)
            if covered != list(range(len(pts))):
                raise NotAntipodal("pairing must cover every index exactly once")
            for a, b in pairing:
                if np.linalg.norm(pts[a] + pts[b]) > max(self.tol, 1e-12):
                    raise NotAntipodal(f"points {a} and {b} are not antipodal")
            object.__setattr__(self, "pairing", pairing)

    def __len__(self) -> int:
        return self.points.shape[0]

    def __getitem__(self, i) -> SphPoint:
        return SphPoint(*self.points[i])

    @property
    def is_paired(self) -> bool:
        return self.pairing is not None

    def subset(self, indices, label: str | None = None) -> "NodeSet":
        """Rows ``indices`` as a new set; pairing is kept when the subset is closed under it."""
        indices = [int(i) for i in indices]
        pairing = None
        if self.pairing is not None:
            where = {old: new for new, old in enumerate(indices)}
            partner = {}
            for a, b in self.pairing:
                partner[a], partner[b] = b, a
            if all(partner[i] in where for i in indices):
                pairing = tuple(sorted({tuple(sorted((where[i], where[partner[i]])))
                                        for i in indices}))
        return NodeSet(self.points[indices], label if label is not None else self.label,
                       pairing, self.tol)

    def with_detected_pairing(self) -> "NodeSet":
        """Return a copy with pairing metadata found geometrically, or raise NotAntipodal."""
        pairing = detect_pairing(self.points, self.tol)
        if pairing is None:
            raise NotAntipodal("node set is not antipodally symmetric")
        return NodeSet(self.points, self.label, pairing, self.tol)

    def antipodal_partner(self) -> np.ndarray:
        """partner[i] = index of -points[i]; requires pairing."""
        if self.pairing is None:
            raise NotAntipodal("node set has no pairing metadata")
        partner = np.empty(len(self), dtype=int)
        for a, b in self.pairing:
            partner[a], partner[b] = b, a
        return partner


def detect_pairing(points, tol: float = DUPLICATE_TOL):
    pts = np.asarray(points, dtype=float)
    dist, idx = cKDTree(pts).query(-pts, k=1)
    if np.any(dist > tol) or np.any(idx[idx] != np.arange(len(pts))) or np.any(idx == np.arange(len(pts))):
        return None
    return tuple(sorted({tuple(sorted((i, int(j)))) for i, j in enumerate(idx)}))


def antipodal_complete(X: NodeSet, tol: float = DUPLICATE_TOL) -> NodeSet:
    """X cup (-X): originals keep indices 0..N-1, antipodes follow at N..2N-1."""
    if len(X) == 0:
        raise ValueError("cannot complete an empty node set")
    if X.pairing is not None:
        raise AntipodalCollision("node set is already antipodally paired")
    pts = X.points
    dist, _ = cKDTree(pts).query(-pts, k=1)
    if np.any(dist <= tol):
        raise AntipodalCollision("node set already contains an antipodal pair")
    n = len(pts)
    pairing = tuple((j, j + n) for j in range(n))
    label = f"{X.label}+antipodes" if X.label else "antipodal completion"
    return NodeSet(np.vstack([pts, -pts]), label, pairing, tol)


def interleave_pairs(X: NodeSet) -> NodeSet:
    """Reorder a paired set so that each antipodal pair occupies adjacent rows."""
    if X.pairing is None:
        raise NotAntipodal("node set has no pairing metadata")
    order = [i for pair in X.pairing for i in pair]
    return X.subset(order)


def fibonacci_grid(L: int) -> NodeSet:
    """Golden-angle spiral lattice with symmetric latitudes z_i = 1 - (2i+1)/L."""
    if L < 1:
        raise ValueError("L must be positive")
    i = np.arange(L, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / L
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    theta = np.mod(GOLDEN_ANGLE * i, 2.0 * np.pi)
    pts = np.column_stack([rho * np.cos(theta), rho * np.sin(theta), z])
    return NodeSet(pts, f"fibonacci-{L}")


def random_nodes(N: int, seed: int = 0) -> NodeSet:
    """N independent uniform points (normalized Gaussian vectors)."""
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((N, 3))
    return NodeSet(pts / np.linalg.norm(pts, axis=1)[:, None], f"random-{N}-seed{seed}")


def equatorial_nodes(N: int) -> NodeSet:
    ang = 2.0 * np.pi * np.arange(N) / N
    return NodeSet(np.column_stack([np.cos(ang), np.sin(ang), np.zeros(N)]), f"equator-{N}")


def icosahedron() -> NodeSet:
    """The 12 vertices of the regular icosahedron (a spherical 5-design), antipodally paired."""
    g = (1.0 + np.sqrt(5.0)) / 2.0
    pts = []
    for a in (-1.0, 1.0):
        for b in (-g, g):
            pts += [(0.0, a, b), (a, b, 0.0), (b, 0.0, a)]
    return NodeSet(np.array(pts), "icosahedron").with_detected_pairing()


def rotation_matrix(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


# ---------------------------------------------------------------- file I/O

def _check_on_sphere(pts: np.ndarray, tol: float = OFF_SPHERE_TOL) -> np.ndarray:
    nrm = np.linalg.norm(pts, axis=1)
    bad = np.flatnonzero(np.abs(nrm - 1.0) > tol)
    if bad.size:
        raise OffSphereError(f"row {bad[0]} has norm {nrm[bad[0]]:.17g}")
    return pts


def _infer_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix == ".json":
        return "json"
    return "xyz"


def load_nodes(path, format: str | None = None, label: str | None = None) -> NodeSet:
    """Read nodes from xyz-text, CSV (header x,y,z) or a JSON array of triples.

    Points within 1e-6 of the unit sphere are renormalized; anything further
    raises OffSphereError.
    """
    path = Path(path)
    fmt = format or _infer_format(path)
    text = path.read_text()
    try:
        if fmt in ("xyz", "xyz-text", "txt"):
            rows = []
            for lineno, line in enumerate(text.splitlines(), 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.replace(",", " ").split()
                if len(parts) != 3:
                    raise ParseError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
                rows.append([float(v) for v in parts])
        elif fmt == "csv":
            reader = csv.DictReader(io.StringIO(text))
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "y", "z"]:
                raise ParseError(f"{path}: CSV header must be x,y,z")
            rows = [[float(r[k]) for k in reader.fieldnames] for r in reader]
        elif fmt == "json":
            data = json.loads(text)
            if isinstance(data, dict):
                data = data.get("points", data)
            rows = [[float(v) for v in row] for row in data]
            if any(len(r) != 3 for r in rows):
                raise ParseError(f"{path}: every JSON entry must be an [x, y, z] triple")
        else:
            raise ParseError(f"unknown node file format {fmt!r}")
    except (ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"{path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no points found")
    pts = _check_on_sphere(np.array(rows, dtype=float))
    return NodeSet(pts, label if label is not None else path.stem)


def format_nodes(X: NodeSet, format: str = "xyz") -> str:
    pts = X.points
    if format in ("xyz", "xyz-text", "txt"):
        lines = [f"# {X.label}"] if X.label else []
        lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in pts]
        return "\n".join(lines) + "\n"
    if format == "csv":
        return "x,y,z\n" + "".join(f"{x:.17g},{y:.17g},{z:.17g}\n" for x, y, z in pts)
    if format == "json":
        return "[" + ",\n ".join(f"[{x:.17g}, {y:.17g}, {z:.17g}]" for x, y, z in pts) + "]\n"
    raise ValueError(f"unknown node file format {format!r}")


def save_nodes(X: NodeSet, path, format: str | None = None) -> None:
    path = Path(path)
    path.write_text(format_nodes(X, format or _infer_format(path)))


# ---------------------------------------------------------------- designs

@dataclass(frozen=True)
class DesignCertificate:
    strength: int
    max_defect: float
    granted: bool


def design_defects(X: NodeSet, k: int) -> np.ndarray:
    """|mean of u_{l,m} over X| for every harmonic with 1 <= l <= k."""
    V = eval_basis(HarmonicBasis(k), X.points)
    return np.abs(V[:, 1:].mean(axis=0))


def verify_design(X: NodeSet, k: int, tol: float = 1e-10) -> DesignCertificate:
    """Check the equal-weight quadrature on harmonics of degree 1..k.

    By linearity it suffices to test basis functions; their exact integrals
    vanish for l >= 1 and the degree-0 condition holds trivially.
    """
    if k < 1:
        raise ValueError("design strength must be >= 1")
    max_defect = float(design_defects(X, k).max())
    return DesignCertificate(k, max_defect, max_defect < tol)

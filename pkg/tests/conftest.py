from pathlib import Path

import numpy as np
import pytest

from spherefit.harmonics import HarmonicBasis
from spherefit.nodes import icosahedron, load_nodes, random_nodes
from spherefit.selection import fekete_select
from spherefit.solver import FitProblem
from spherefit.vandermonde import assemble

DATA = Path(__file__).parent / "data"
DESIGN_T13 = DATA / "design_t13_n120.xyz"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def ico():
    return icosahedron()


@pytest.fixture(scope="session")
def design13():
    return load_nodes(DESIGN_T13)


def random_problem(seed, r=None, m=None, N=None, parity_ordered=False):
    """Random admissible problem: random nodes, Fekete X_M, random data."""
    rs = np.random.default_rng(seed)
    if r is None:
        r = int(rs.integers(2, 7))
    if m is None:
        m = int(rs.integers(0, r))
    R = (r + 1) ** 2
    if N is None:
        N = R + int(rs.integers(5, 3 * R))
    X = random_nodes(N, seed=int(rs.integers(0, 2**31)))
    sel = fekete_select(X, m, r)
    V = assemble(X, HarmonicBasis(r, parity_ordered))
    return FitProblem(V, sel.indices, rs.standard_normal(N))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

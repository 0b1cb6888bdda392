import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherefit.errors import RankDeficient
from spherefit.harmonics import HarmonicBasis, eval_basis
from spherefit.nodes import equatorial_nodes, fibonacci_grid, random_nodes
from spherefit.selection import (admissible_degrees, antipodal_select, appended_sigma_min,
                                 approximate_fekete, fekete_select, pair_rank_additivity_check,
                                 pair_system)
from spherefit.vandermonde import rank_report_from_matrix


def greedy_volume(A, M):
    """Reference greedy row selection: pick the row with largest residual norm, deflate."""
    A = np.array(A, dtype=float)
    chosen = []
    for _ in range(M):
        norms = np.linalg.norm(A, axis=1)
        norms[chosen] = -1
        i = int(np.argmax(norms))
        chosen.append(i)
        q = A[i] / np.linalg.norm(A[i])
        A = A - np.outer(A @ q, q)
    return np.array(chosen)


def test_admissible_degrees():
    assert admissible_degrees(8, 5) == [1]
    assert admissible_degrees(16, 5) == [1, 3]
    assert admissible_degrees(16, 3) == [1]
    assert admissible_degrees(3, 5) == []


@pytest.mark.parametrize("K,n", [(0, 6), (3, 8), (7, 12), (11, 12)])
def test_appended_sigma_min_matches_svd(K, n):
    rs = np.random.default_rng(K + n)
    A = rs.normal(size=(K, n))
    rows = rs.normal(size=(9, n))
    fast = appended_sigma_min(A, rows)
    ref = [np.linalg.svd(np.vstack([A, v]), compute_uv=False)[-1] for v in rows]
    np.testing.assert_allclose(fast, ref, rtol=1e-10)


def test_appended_sigma_min_dependent_row():
    rs = np.random.default_rng(0)
    A = rs.normal(size=(4, 7))
    fast = appended_sigma_min(A, np.vstack([A[0] + 2 * A[1], rs.normal(size=7)]))
    assert fast[0] < 1e-12 * np.linalg.norm(A, 2)
    assert fast[1] > 1e-3


def test_fekete_matches_reference_greedy():
    X = fibonacci_grid(200)
    # row norms of a full-degree Vandermonde are all equal; weights break the ties
    w = np.random.default_rng(0).uniform(0.5, 1.5, size=200)
    V = w[:, None] * eval_basis(HarmonicBasis(4), X.points)
    np.testing.assert_array_equal(approximate_fekete(V, 25), greedy_volume(V, 25))


def test_fekete_select_unisolvent():
    X = random_nodes(150, seed=3)
    sel = fekete_select(X, 4, r=6)
    assert sel.M == 25 and sel.rank_certificate.numerical_rank == 25
    assert len(set(sel.indices)) == 25
    with pytest.raises(RankDeficient):
        approximate_fekete(eval_basis(HarmonicBasis(3), equatorial_nodes(40).points), 16)


def test_antipodal_select_small_case():
    sel = antipodal_select(random_nodes(30, seed=0), 3)
    assert sel.m == 1 and sel.M == 4 and sel.K_max == 6
    n = 30
    assert sel.indices[2:] == [j + n for j in sel.indices[:2]]
    assert sel.rank_certificate.numerical_rank == 4
    d = json.loads(sel.to_json())
    assert d["schema"] == "spherefit/1" and d["M"] == 4 and len(d["subset"]) == 4


def test_empty_when_no_admissible_degree():
    # one base pair yields J of size 1, and (s + 1)^2 <= 2 with even square has no solution
    sel = antipodal_select(random_nodes(1, seed=0), 3)
    assert sel.indices == [] and sel.m is None and sel.M == 0
    assert len(sel.subset) == 0


def test_history_is_consistent():
    sel = antipodal_select(random_nodes(40, seed=5), 5)
    adds = [h for h in sel.history if h["action"] == "add"]
    removes = [h for h in sel.history if h["action"] == "remove"]
    assert len(adds) == sel.K_max
    assert sel.K_max - len(removes) == sel.M // 2
    assert set(sel.history[-1]["J"]) == set(sel.base_indices)


@pytest.mark.slow
def test_fibonacci_large_degree():
    sel = antipodal_select(fibonacci_grid(100), 9)
    assert (sel.m + 1) ** 2 == sel.M and sel.m % 2 == 1


@settings(max_examples=15, deadline=None)
@given(st.integers(10, 60), st.sampled_from([3, 5, 7]), st.integers(0, 10_000))
def test_selection_contract(n, r, seed):
    base = random_nodes(n, seed=seed)
    sel = antipodal_select(base, r)
    if sel.M == 0:
        return
    assert sel.M == (sel.m + 1) ** 2 and sel.m % 2 == 1 and sel.m < r
    assert sel.rank_certificate.numerical_rank == sel.M
    basis = HarmonicBasis(r, parity_ordered=True)
    Vb = eval_basis(basis, base.points)
    for step in sel.history:
        assert pair_rank_additivity_check(pair_system(Vb, basis, step["J"]))


def test_pair_system_rank_failure_detected():
    base = random_nodes(20, seed=1)
    basis = HarmonicBasis(1, parity_ordered=True)  # R+ = 1, R- = 3
    Vb = eval_basis(basis, base.points)
    assert pair_rank_additivity_check(pair_system(Vb, basis, [0]))
    assert not pair_rank_additivity_check(pair_system(Vb, basis, [0, 1]))
    full = pair_system(Vb, basis, [0, 1]).full_matrix()
    assert rank_report_from_matrix(full).numerical_rank < 4

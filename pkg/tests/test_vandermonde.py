import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherefit.errors import NotAntipodal
from spherefit.harmonics import FOUR_PI, HarmonicBasis
from spherefit.nodes import (antipodal_complete, equatorial_nodes, fibonacci_grid, icosahedron,
                             random_nodes)
from spherefit.vandermonde import (assemble, discrete_inner, discrete_norm, numerical_rank,
                                   parity_split_spectrum, rank_report, rank_report_from_matrix)


def test_shape_and_readonly():
    V = assemble(random_nodes(30, seed=1), HarmonicBasis(3))
    assert V.shape == (30, 16)
    with pytest.raises(ValueError):
        V.entries[0, 0] = 1.0


def test_icosahedron_gram_identity(ico):
    # a 5-design integrates products of degree <= 2 harmonics exactly
    V = assemble(ico, HarmonicBasis(2))
    G = V.entries.T @ V.entries * FOUR_PI / len(ico)
    assert np.abs(G - np.eye(9)).max() < 1e-10


def test_design_gram_identity(design13):
    V = assemble(design13, HarmonicBasis(6))
    alpha = len(design13) / FOUR_PI
    assert np.abs(V.entries.T @ V.entries - alpha * np.eye(49)).max() < 1e-10 * alpha


def test_rank_report_numbers():
    A = np.diag([4.0, 2.0, 1e-12])
    rep = rank_report_from_matrix(A)
    assert rep.numerical_rank == 2
    assert not rep.full_column_rank
    assert rep.condition_number == np.inf
    rep = rank_report_from_matrix(np.diag([4.0, 2.0]))
    assert rep.condition_number == pytest.approx(2.0)
    assert numerical_rank(np.zeros(0)) == 0


def test_equator_is_rank_deficient():
    # z is not seen by equatorial nodes, so degree >= 1 loses rank
    V = assemble(equatorial_nodes(40), HarmonicBasis(3))
    rep = rank_report(V)
    assert rep.numerical_rank == 7  # 2r + 1 trigonometric functions survive
    assert not rep.full_column_rank


def test_discrete_inner_products():
    V = assemble(random_nodes(40, seed=2), HarmonicBasis(2))
    rs = np.random.default_rng(0)
    p, q = rs.normal(size=9), rs.normal(size=9)
    assert discrete_inner(p, q, V) == pytest.approx(np.dot(V.entries @ p, V.entries @ q))
    assert discrete_norm(p, V) == pytest.approx(np.linalg.norm(V.entries @ p))
    with pytest.raises(ValueError):
        discrete_inner(p[:4], q, V)


def test_rows_subset_and_csv(tmp_path):
    X = random_nodes(10, seed=3)
    V = assemble(X, HarmonicBasis(2))
    sub = V.rows_subset([2, 5])
    np.testing.assert_array_equal(sub.entries, V.entries[[2, 5]])
    V.to_csv(tmp_path / "v.csv")
    np.testing.assert_array_equal(np.loadtxt(tmp_path / "v.csv", delimiter=","), V.entries)


def test_parity_blocks_only_for_parity_basis():
    V = assemble(random_nodes(20, seed=4), HarmonicBasis(2))
    assert V.even_block is None
    Vp = assemble(random_nodes(20, seed=4), HarmonicBasis(2, parity_ordered=True))
    assert Vp.even_block.shape == (20, 6) and Vp.odd_block.shape == (20, 3)


def test_split_requires_pairing():
    with pytest.raises(NotAntipodal):
        parity_split_spectrum(assemble(random_nodes(20, seed=4), HarmonicBasis(2, True)))
    with pytest.raises(ValueError):
        parity_split_spectrum(assemble(icosahedron(), HarmonicBasis(2)))


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 40), st.integers(1, 6), st.integers(0, 10_000))
def test_split_spectrum_multiset(n, r, seed):
    X = antipodal_complete(random_nodes(n, seed=seed))
    V = assemble(X, HarmonicBasis(r, parity_ordered=True))
    sp = parity_split_spectrum(V)
    merged = np.sort(np.concatenate([sp.sigma_even, sp.sigma_odd]))[::-1]
    full = V.singular_values
    k = min(full.size, merged.size)
    np.testing.assert_allclose(merged[:k], full[:k], rtol=1e-9, atol=1e-12 * full[0])


def test_split_kappa_matches_direct():
    X = antipodal_complete(fibonacci_grid(60).subset(range(30)))
    V = assemble(X, HarmonicBasis(4, parity_ordered=True))
    sp = parity_split_spectrum(V)
    assert sp.kappa2 == pytest.approx(sp.kappa2_direct, rel=1e-9)

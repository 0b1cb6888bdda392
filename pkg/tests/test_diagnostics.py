import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_problem
from spherefit.diagnostics import (TEST_FUNCTIONS, default_grid_size, degree_rule, fit_antipodal,
                                   fit_fekete, get_test_function, interpolate_degree_m,
                                   lebesgue_constant, norming_constant, polynomial_function,
                                   pythagorean_check, quasi_opt_prefactor, quasi_opt_report,
                                   uniform_error, validate_degree)
from spherefit.errors import NotUnisolvent
from spherefit.harmonics import FOUR_PI, HarmonicBasis, eval_basis
from spherefit.nodes import equatorial_nodes, fibonacci_grid, random_nodes
from spherefit.selection import fekete_select
from spherefit.solver import solve
from spherefit.vandermonde import assemble


def test_degree_rule():
    assert degree_rule(20) == (6, 9)
    assert degree_rule(10) == (3, 5)
    assert degree_rule(0) == (1, 2)


def test_test_functions_values():
    p = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    np.testing.assert_allclose(TEST_FUNCTIONS["f1"](p), [1.0, 1.0])
    np.testing.assert_allclose(TEST_FUNCTIONS["f2"](p), [0.5, math.sin(3) + 0.5])
    np.testing.assert_allclose(TEST_FUNCTIONS["f3"](p), [1 / 7, 1 / 4])
    np.testing.assert_allclose(TEST_FUNCTIONS["f4"](p), [1 / 10.75, 1 / 10.75])
    with pytest.raises(ValueError):
        get_test_function("f9")


def test_interpolation_exact_on_polynomials():
    X = fekete_select(random_nodes(80, seed=1), 3).subset
    basis = HarmonicBasis(3)
    c = np.random.default_rng(0).normal(size=16)
    np.testing.assert_allclose(interpolate_degree_m(X, eval_basis(basis, X.points) @ c, 3), c,
                               atol=1e-10)
    with pytest.raises(NotUnisolvent):
        interpolate_degree_m(X.subset(range(10)), np.zeros(10), 3)


def test_lebesgue_constant_against_explicit_cardinals():
    X = fekete_select(random_nodes(60, seed=2), 2).subset
    lam = lebesgue_constant(X, 2, 400)
    # cardinal functions from the explicit inverse
    basis = HarmonicBasis(2)
    Vinv = np.linalg.inv(eval_basis(basis, X.points))
    card = eval_basis(basis, fibonacci_grid(400).points) @ Vinv
    assert lam == pytest.approx(np.abs(card).sum(axis=1).max(), rel=1e-10)
    assert lam >= 1.0


def test_norming_constants(design13, ico):
    assert norming_constant(assemble(design13, HarmonicBasis(6))) == pytest.approx(
        1 / FOUR_PI, abs=1e-10)
    assert norming_constant(assemble(ico, HarmonicBasis(2))) == pytest.approx(1 / FOUR_PI)
    assert norming_constant(assemble(equatorial_nodes(50), HarmonicBasis(2))) == 0.0


def test_quasi_opt():
    assert quasi_opt_prefactor(1 / FOUR_PI, 1.0) == pytest.approx(4 * math.sqrt(FOUR_PI))
    with pytest.raises(ValueError):
        quasi_opt_prefactor(0.0, 2.0)
    with pytest.raises(ValueError):
        quasi_opt_prefactor(1.0, 0.5)
    X = random_nodes(200, seed=3)
    sub = fekete_select(X, 2).subset
    rep = quasi_opt_report(assemble(X, HarmonicBasis(4)), sub, 2, 300)
    assert rep.prefactor > rep.lebesgue


def test_pythagorean_identity():
    prob = random_problem(4, r=5, m=3)
    fit = solve(prob)
    pm = interpolate_degree_m(prob.V_N.nodes.subset(prob.constraint_rows), prob.f_M, 3)
    assert pythagorean_check(prob, fit, pm) < 1e-8
    with pytest.raises(NotUnisolvent):
        pythagorean_check(prob, fit, pm[:9])


def test_pythagorean_detects_wrong_fit():
    prob = random_problem(6, r=5, m=2)
    fit = solve(prob)
    pm = interpolate_degree_m(prob.V_N.nodes.subset(prob.constraint_rows), prob.f_M, 2)
    fit.coeffs = fit.coeffs + 1e-2 * np.random.default_rng(0).normal(size=fit.coeffs.size)
    assert pythagorean_check(prob, fit, pm) > 1e-6


def test_pipelines_and_uniform_error():
    f = get_test_function("f1")
    fit, prob, sel = fit_fekete(fibonacci_grid(200), f, 3, 5)
    rep = uniform_error(fit, f, 500, keep_errors=True)
    assert rep.E_inf == rep.errors.max() and rep.grid_size == 500
    assert rep.E_inf < 5e-2
    fit2, prob2, sel2 = fit_antipodal(fibonacci_grid(100), f, 5, path="parity")
    assert fit2.path_taken == "parity" and sel2.M == prob2.M
    assert uniform_error(fit2, f, 500).E_inf < 5e-2
    with pytest.raises(ValueError):
        uniform_error(fit, f, 0)
    assert default_grid_size(20) == 4 * 441


def test_polynomial_function_is_fit_exactly():
    basis = HarmonicBasis(3)
    g = polynomial_function(basis, np.random.default_rng(1).normal(size=16))
    fit, _, _ = fit_fekete(random_nodes(90, seed=2), g, 2, 4)
    assert uniform_error(fit, g, 300).E_inf < 1e-11


def test_validate_degree_table():
    fams = [fibonacci_grid(60), random_nodes(60, seed=9)]
    funcs = [get_test_function("f1"), get_test_function("f3")]
    r_star, table = validate_degree(funcs, fams, [2, 3, 4, 5], L=400)
    assert r_star in (2, 3, 4, 5)
    totals = table.totals()
    assert totals[r_star] == min(totals.values())
    assert len(table.cells) == 4 * 2 * 2
    with pytest.raises(ValueError):
        validate_degree([], fams, [2])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_pythagorean_property(seed):
    rs = np.random.default_rng(seed)
    r = int(rs.integers(2, 7))
    m = int(rs.integers(0, r))
    prob = random_problem(seed, r=r, m=m)
    fit = solve(prob)
    pm = interpolate_degree_m(prob.V_N.nodes.subset(prob.constraint_rows), prob.f_M, m)
    assert pythagorean_check(prob, fit, pm) < 1e-8

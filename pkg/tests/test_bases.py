import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from opau.bases import (
    PolyBasis,
    Quadrature,
    basis_matrix,
    eval_basis,
    eval_basis_with_deriv,
    gram_matrix,
    inner_product,
    monomial_coeffs,
    normalized_gram,
    values_at_zero,
)

# Independent evaluators for each family.
ORACLES = {
    PolyBasis.CP1: special.eval_chebyt,
    PolyBasis.CP2: special.eval_chebyu,
    PolyBasis.LAU: special.eval_laguerre,
    PolyBasis.LEG: special.eval_legendre,
    PolyBasis.HP1: special.eval_hermitenorm,
    PolyBasis.HP2: special.eval_hermite,
}


def test_parse_accepts_aliases():
    assert PolyBasis.parse("hp-1") is PolyBasis.HP1
    assert PolyBasis.parse(PolyBasis.LEG) is PolyBasis.LEG


def test_parse_rejects_unknown_and_lists_names():
    with pytest.raises(ValueError, match="CP1, CP2, LAU, LEG, HP1, HP2"):
        PolyBasis.parse("BOGUS")


@pytest.mark.parametrize("basis", list(PolyBasis))
def test_weight_nonnegative_inside_domain(basis):
    lo, hi = basis.domain
    x = np.linspace(max(lo, -20) + 1e-6, min(hi, 20) - 1e-6, 101)
    assert np.all(basis.weight(x) >= 0)


def test_weight_zero_outside_domain():
    assert PolyBasis.LAU.weight(-1.0) == 0.0
    assert PolyBasis.CP1.weight(1.5) == 0.0


@pytest.mark.parametrize(
    "basis,n,x,expected",
    [
        (PolyBasis.LEG, 5, 1.0, [1, 1, 1, 1, 1, 1]),
        (PolyBasis.LAU, 3, 0.0, [1, 1, 1, 1]),
        (PolyBasis.CP1, 5, 0.5, [1, 0.5, -0.5, -1.0, -0.5, 0.5]),
        (PolyBasis.HP1, 4, 0.0, [1, 0, -1, 0, 3]),
    ],
)
def test_known_values(basis, n, x, expected):
    np.testing.assert_allclose(eval_basis(basis, n, x).values, expected, atol=1e-14)


@pytest.mark.parametrize(
    "basis,n,x,expected",
    [
        (PolyBasis.CP1, 2, 0.5, [0, 1, 2.0]),
        (PolyBasis.HP1, 2, 1.0, [0, 1, 2.0]),
    ],
)
def test_known_derivatives(basis, n, x, expected):
    np.testing.assert_allclose(eval_basis_with_deriv(basis, n, x).derivs, expected, atol=1e-14)


@pytest.mark.parametrize("basis", list(PolyBasis))
def test_degree_zero_is_constant_one(basis):
    ev = eval_basis_with_deriv(basis, 0, 3.3)
    assert ev.values.tolist() == [1.0]
    assert ev.derivs.tolist() == [0.0]


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        eval_basis(PolyBasis.HP1, -1, 0.0)
    with pytest.raises(ValueError):
        eval_basis(PolyBasis.HP1, 3, math.nan)


@pytest.mark.parametrize("basis", list(PolyBasis))
def test_matches_scipy_oracle(basis):
    x = np.random.default_rng(1).uniform(-2, 2, 200)
    vals = basis_matrix(basis, 10, x)
    for n in range(11):
        ref = ORACLES[basis](n, x)
        np.testing.assert_allclose(vals[:, n], ref, rtol=1e-10, atol=1e-10 * np.max(np.abs(ref)))


@pytest.mark.parametrize("basis", list(PolyBasis))
def test_monomial_expansion_matches_numpy_series(basis):
    conv = {
        PolyBasis.CP1: np.polynomial.chebyshev.cheb2poly,
        PolyBasis.LAU: np.polynomial.laguerre.lag2poly,
        PolyBasis.LEG: np.polynomial.legendre.leg2poly,
        PolyBasis.HP1: np.polynomial.hermite_e.herme2poly,
        PolyBasis.HP2: np.polynomial.hermite.herm2poly,
    }
    coeffs = monomial_coeffs(basis, 8)
    for n in range(9):
        if basis is PolyBasis.CP2:
            # U_n from its power series via scipy's orthopoly1d
            ref = special.chebyu(n).coeffs[::-1]
        else:
            unit = np.zeros(n + 1)
            unit[n] = 1.0
            ref = conv[basis](unit)
        np.testing.assert_allclose(coeffs[n, : n + 1], ref, rtol=1e-9, atol=1e-9)
        assert np.all(coeffs[n, n + 1 :] == 0)


@pytest.mark.parametrize("basis", list(PolyBasis))
def test_derivatives_match_finite_differences(basis):
    h = 1e-5
    for x in np.random.default_rng(2).uniform(-2, 2, 20):
        ev = eval_basis_with_deriv(basis, 8, x)
        fd = (eval_basis(basis, 8, x + h).values - eval_basis(basis, 8, x - h).values) / (2 * h)
        mask = np.abs(ev.values) > 1e-8
        rel = np.abs(ev.derivs - fd)[mask] / np.maximum(np.abs(fd[mask]), 1.0)
        assert rel.max() <= 1e-6


@given(st.sampled_from(list(PolyBasis)), st.floats(-50, 50), st.integers(0, 12))
def test_scalar_and_vector_paths_agree(basis, x, n):
    ev = eval_basis_with_deriv(basis, n, x)
    vals, ders = basis_matrix(basis, n, np.array([x]), with_deriv=True)
    np.testing.assert_allclose(vals[0], ev.values, rtol=1e-12, atol=0)
    np.testing.assert_allclose(ders[0], ev.derivs, rtol=1e-12, atol=0)
    assert ev.values[0] == 1.0 and ev.derivs[0] == 0.0


@pytest.mark.parametrize("basis", list(PolyBasis))
def test_values_at_zero_match_oracle(basis):
    np.testing.assert_allclose(
        values_at_zero(basis, 6), [ORACLES[basis](n, 0.0) for n in range(7)], atol=1e-14
    )


def test_inner_product_known_norms():
    assert inner_product(PolyBasis.LEG, 0, 0) == pytest.approx(2.0, rel=1e-12)
    assert inner_product(PolyBasis.CP1, 1, 1) == pytest.approx(math.pi / 2, rel=1e-12)
    assert inner_product(PolyBasis.HP1, 3, 3) == pytest.approx(math.sqrt(2 * math.pi) * 6, rel=1e-10)
    assert inner_product(PolyBasis.HP2, 2, 2) == pytest.approx(math.sqrt(math.pi) * 8, rel=1e-10)
    assert inner_product(PolyBasis.LAU, 4, 4) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("rule", ["gauss", "composite"])
@pytest.mark.parametrize("basis", list(PolyBasis))
def test_orthogonality(basis, rule):
    gram = gram_matrix(basis, 6, Quadrature(rule=rule, nodes=64))
    scale = np.sqrt(np.outer(np.diag(gram), np.diag(gram)))
    off = np.abs(gram - np.diag(np.diag(gram))) / scale
    assert off.max() <= 1e-6


def test_normalized_gram_single_entry():
    gram = normalized_gram(PolyBasis.CP1, 0)
    assert gram.shape == (1, 1)
    assert gram[0, 0] == pytest.approx(1.0, rel=1e-15)


def test_quadrature_rejects_zero_nodes():
    with pytest.raises(ValueError):
        gram_matrix(PolyBasis.LEG, 2, Quadrature(nodes=0))

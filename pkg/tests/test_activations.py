import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import special

from opau.activations import (
    OpauParams,
    PauParams,
    PoleError,
    activation_backward,
    activation_map,
    baseline_deriv,
    baseline_forward,
    opau_backward,
    opau_forward,
    pau_backward,
    pau_forward,
    pau_map,
)
from opau.bases import PolyBasis, basis_matrix, monomial_coeffs, values_at_zero
from opau.fit import published_params

HP1_AT_ZERO = 0.124143  # hand-evaluated: 0.1632750 / 1.3152231


def reference_safe(params, x):
    """Direct evaluation with scipy's Hermite/Chebyshev/... polynomials."""
    f = basis_matrix(params.basis, max(params.k, params.l), np.atleast_1d(x))
    p = f[:, : params.k + 1] @ params.c
    q = 1.0 + np.abs(f[:, 1 : params.l + 1]) @ np.abs(params.d)
    return p / q


def fd(fun, x, h=1e-5):
    return (fun(x + h) - fun(x - h)) / (2 * h)


def test_zero_numerator_gives_zero():
    p = OpauParams(PolyBasis.LAU, np.zeros(6), [0.3, -1, 2, 0.5])
    assert opau_forward(p, 1.7) == 0.0
    assert np.all(opau_backward(p, 1.7).d_d == 0)


@pytest.mark.parametrize("basis", list(PolyBasis))
def test_constant_unit(basis):
    p = OpauParams.constant(basis)
    np.testing.assert_array_equal(activation_map(p, [-1.0, 0.0, 1.0]), [1, 1, 1])
    g = opau_backward(p, 0.37)
    assert g.d_input == 0.0
    # dG/dc_i = f_i(x) / Q with Q = 1; dG/dd_j carries sgn(0) = 0
    np.testing.assert_allclose(g.d_c, basis_matrix(basis, 5, [0.37])[0], rtol=1e-14)
    assert g.d_c[0] == 1.0
    assert np.all(g.d_d == 0)


def test_hp1_published_at_zero():
    p = published_params("HP1")
    assert opau_forward(p, 0.0) == pytest.approx(HP1_AT_ZERO, abs=1e-5)
    assert activation_map(p, [0.0])[0] == pytest.approx(HP1_AT_ZERO, abs=1e-5)
    c, d = p.c, p.d
    num = c[0] - c[2] + 3 * c[4]
    den = 1 + abs(d[1]) + 3 * abs(d[3])
    assert num == pytest.approx(0.1632750, abs=1e-7)
    assert den == pytest.approx(1.3152231, abs=1e-7)
    assert opau_forward(p, 0.0) == pytest.approx(num / den, rel=1e-14)


def test_hp1_published_close_to_leaky_relu_at_two():
    assert abs(opau_forward(published_params("HP1"), 2.0) - 2.0) <= 0.15


def test_hp1_scipy_oracle():
    p = published_params("HP1")
    x = np.linspace(-4, 4, 41)
    he = np.array([special.eval_hermitenorm(n, x) for n in range(6)])
    expect = (p.c @ he) / (1 + np.abs(p.d) @ np.abs(he[1:5]))
    np.testing.assert_allclose(activation_map(p, x), expect, rtol=1e-13, atol=1e-15)


def test_hp1_published_gradient_at_point_seven():
    p = published_params("HP1")
    x = 0.7
    g = opau_backward(p, x)
    assert g.d_input == pytest.approx(fd(lambda t: opau_forward(p, t), x), rel=1e-6)
    for i in range(p.c.size):
        def f(v, i=i):
            q = p.copy()
            q.c[i] = v
            return opau_forward(q, x)
        assert g.d_c[i] == pytest.approx(fd(f, p.c[i]), rel=1e-6)
    for j in range(p.d.size):
        def f(v, j=j):
            q = p.copy()
            q.d[j] = v
            return opau_forward(q, x)
        assert g.d_d[j] == pytest.approx(fd(f, p.d[j]), rel=1e-6)


def test_empty_input():
    p = published_params("CP2")
    assert activation_map(p, []).shape == (0,)
    y, dx, dc, dd = activation_backward(p, np.zeros((0, 3)), np.zeros((0, 3)))
    assert y.shape == (0, 3) and np.all(dc == 0) and np.all(dd == 0)


def test_shape_preserved_and_params_summed():
    p = published_params("LEG")
    x = np.random.default_rng(0).normal(size=(4, 5))
    up = np.random.default_rng(1).normal(size=(4, 5))
    y, dx, dc, dd = activation_backward(p, x, up)
    assert y.shape == dx.shape == (4, 5)
    total_c = sum(opau_backward(p, xv, uv).d_c for xv, uv in zip(x.ravel(), up.ravel()))
    np.testing.assert_allclose(dc, total_c, rtol=1e-12)


def test_rejects_nonfinite():
    p = published_params("HP1")
    with pytest.raises(ValueError):
        activation_map(p, [np.inf])
    with pytest.raises(ValueError):
        OpauParams(PolyBasis.HP1, [np.nan], [])


def test_unsafe_pole_raises():
    # Q(x) = 1 - x vanishes at x = 1 in the monomial-like CP1 basis (f_1 = x)
    p = OpauParams(PolyBasis.CP1, [1.0, 0.0], [-1.0], safe=False)
    with pytest.raises(PoleError):
        activation_map(p, [1.0])
    assert opau_forward(p, 0.5) == pytest.approx(2.0)


def test_json_round_trip_is_exact():
    p = published_params("LAU")
    q = OpauParams.from_json(p.to_json())
    assert q == p
    doc = json.loads(p.to_json())
    assert doc["k"] == 5 and doc["l"] == 4


def test_from_dict_checks_degrees():
    doc = published_params("HP1").to_dict()
    doc["k"] = 4
    with pytest.raises(ValueError):
        OpauParams.from_dict(doc)


@given(
    st.sampled_from(list(PolyBasis)),
    arrays(np.float64, 6, elements=st.floats(-50, 50)),
    arrays(np.float64, 4, elements=st.floats(-50, 50)),
    arrays(np.float64, 8, elements=st.floats(-100, 100)),
)
def test_safe_mode_finite_and_matches_reference(basis, c, d, x):
    p = OpauParams(basis, c, d)
    y, dx, dc, dd = activation_backward(p, x, np.ones_like(x))
    assert np.all(np.isfinite(y)) and np.all(np.isfinite(dx))
    assert np.all(np.isfinite(dc)) and np.all(np.isfinite(dd))
    np.testing.assert_allclose(y, reference_safe(p, x), rtol=1e-10, atol=1e-12 * (1 + np.abs(y).max()))


@given(st.sampled_from(list(PolyBasis)), st.floats(-3, 3))
def test_zero_input_identity(basis, scale):
    rng = np.random.default_rng(abs(hash((basis, scale))) % 2**32)
    p = OpauParams(basis, rng.normal(size=6) * scale, rng.normal(size=4))
    z = values_at_zero(basis, 5)
    expect = (p.c @ z) / (1 + np.abs(p.d) @ np.abs(z[1:5]))
    assert opau_forward(p, 0.0) == pytest.approx(expect, rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("basis", list(PolyBasis))
def test_basis_equivalence_with_power_form(basis):
    rng = np.random.default_rng(5)
    c = rng.normal(size=6)
    d = np.abs(rng.normal(size=4)) * 0.1
    m = monomial_coeffs(basis, 5)
    a = c @ m
    b = (d @ m[1:5])[1:5]
    b0 = (d @ m[1:5])[0]  # constant part of the denominator polynomial
    x = rng.uniform(-1, 1, 200)
    opau = activation_map(OpauParams(basis, c, d, safe=False), x)
    powers = np.vander(x, 6, increasing=True)
    direct = (powers @ a) / (1 + b0 + powers[:, 1:5] @ b)
    np.testing.assert_allclose(opau, direct, rtol=1e-8)
    if b0 == 0:
        np.testing.assert_allclose(opau, pau_map(PauParams(a, b, "F1"), x), rtol=1e-8)


def test_pau_examples():
    for variant in ("F1", "F2", "F3"):
        assert pau_forward(PauParams([0, 1], [], variant), 3.7) == pytest.approx(3.7)
    assert pau_forward(PauParams([1], [1], "F2"), -2.0) == pytest.approx(1 / 3)


@given(
    arrays(np.float64, 6, elements=st.floats(-5, 5)),
    arrays(np.float64, 4, elements=st.floats(0, 5)),
    arrays(np.float64, 10, elements=st.floats(0, 20)),
)
def test_pau_f2_equals_f3_on_positive_cone(a, b, x):
    f2 = pau_map(PauParams(a, b, "F2"), x)
    f3 = pau_map(PauParams(a, b, "F3"), x)
    np.testing.assert_allclose(f2, f3, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("variant", ["F1", "F2", "F3"])
def test_pau_gradients(variant):
    rng = np.random.default_rng(3)
    p = PauParams(rng.normal(size=6), rng.normal(size=4) * 0.2, variant)
    x = np.array([0.3, -0.8, 1.4])
    _, dx, da, db = pau_backward(p, x, np.ones(3))
    np.testing.assert_allclose(dx, fd(lambda t: pau_map(p, t), x), rtol=1e-6)
    for arr, grad in ((p.a, da), (p.b, db)):
        for i in range(arr.size):
            orig = arr[i]
            arr[i] = orig + 1e-6
            hi = pau_map(p, x).sum()
            arr[i] = orig - 1e-6
            lo = pau_map(p, x).sum()
            arr[i] = orig
            assert grad[i] == pytest.approx((hi - lo) / 2e-6, rel=1e-5, abs=1e-8)


def test_baseline_examples():
    assert baseline_forward("relu", -5.0) == 0.0
    assert baseline_forward("leaky_relu", -2.0, 0.01) == pytest.approx(-0.02)
    assert baseline_forward("swish", 0.0) == 0.0
    assert baseline_forward("softplus", 800.0) == pytest.approx(800.0)
    with pytest.raises(ValueError):
        baseline_forward("tanhh", 0.0)


@pytest.mark.parametrize("kind", ["relu", "leaky_relu", "elu", "softplus", "swish", "identity"])
def test_baseline_derivatives(kind):
    x = np.array([-3.0, -1.2, -0.4, 0.3, 0.9, 2.5])
    np.testing.assert_allclose(
        baseline_deriv(kind, x), fd(lambda t: baseline_forward(kind, t), x), rtol=1e-6, atol=1e-9
    )

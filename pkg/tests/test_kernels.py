import numpy as np
import pytest

from opau import kernels
from opau.bases import PolyBasis

BACKENDS = kernels.available_backends()
needs_compiled = pytest.mark.skipif("compiled" not in BACKENDS, reason="extension not built")
KINDS = [b.code for b in PolyBasis] + [kernels.MONO]


def test_backend_flag():
    assert kernels.BACKEND in BACKENDS


@needs_compiled
@pytest.mark.parametrize("safe", [True, False])
@pytest.mark.parametrize("kind", KINDS)
def test_compiled_matches_pure(kind, safe):
    rng = np.random.default_rng(kind)
    x = rng.uniform(-3, 3, 500)
    up = rng.normal(size=500)
    c = rng.normal(size=6)
    d = rng.normal(size=4) * (1.0 if safe else 0.05)
    pure, comp = BACKENDS["pure"], BACKENDS["compiled"]
    for a, b in zip(pure.basis_eval(x, kind, 7), comp.basis_eval(x, kind, 7)):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    for a, b in zip(pure.opau_forward(x, kind, c, d, safe), comp.opau_forward(x, kind, c, d, safe)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)
    ra = pure.opau_backward(x, up, kind, c, d, safe)
    rb = comp.opau_backward(x, up, kind, c, d, safe)
    for a, b in zip(ra, rb):
        np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-12)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_rejects_bad_kind(name):
    with pytest.raises(ValueError):
        BACKENDS[name].opau_forward(np.zeros(2), 99, np.ones(2), np.ones(1), True)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_sign_convention_at_kink(name):
    # x = 0 is a root of f_1 for HP1, so sgn(f_1) = 0 drops d_1 from Q'
    backend = BACKENDS[name]
    c = np.array([0.0, 1.0])
    d = np.array([2.0])
    _, dx, _, dd, _ = backend.opau_backward(np.zeros(1), np.ones(1), PolyBasis.HP1.code, c, d, True)
    assert dx[0] == pytest.approx(1.0)
    assert dd[0] == 0.0


def test_pure_fallback_selected_by_environment():
    import os
    import subprocess
    import sys

    env = dict(os.environ, OPAU_PURE="1")
    code = (
        "from opau import kernels; from opau.fit import published_params; "
        "from opau.activations import opau_forward; "
        "print(kernels.BACKEND, repr(opau_forward(published_params('HP1'), 0.3)))"
    )
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, value = res.stdout.split()
    assert backend == "pure"
    from opau.activations import opau_forward
    from opau.fit import published_params

    assert float(value) == pytest.approx(opau_forward(published_params("HP1"), 0.3), rel=1e-14)

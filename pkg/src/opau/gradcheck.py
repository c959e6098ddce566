"""Finite-difference checks of the analytic activation and network gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import OpauParams, activation_map, opau_backward
from .bases import PolyBasis, monomial_coeffs
from .nn import Network, network_backward, network_forward, network_loss

__all__ = [
    "relative_error",
    "basis_roots",
    "random_opau_case",
    "fd_opau_gradient",
    "check_opau_gradient",
    "GradcheckReport",
    "gradcheck_random",
    "gradcheck_params",
    "fd_network_gradients",
    "check_network_gradients",
]


def relative_error(analytic, numeric, floor: float = 1e-12) -> np.ndarray:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def basis_roots(basis, n: int) -> np.ndarray:
    """Real roots of f_1..f_n, where the safe denominator has kinks."""
    coeffs = monomial_coeffs(basis, n)
    roots = [np.roots(coeffs[j, : j + 1][::-1]) for j in range(1, n + 1)]
    roots = np.concatenate(roots) if roots else np.zeros(0)
    return np.sort(roots[np.abs(roots.imag) < 1e-9].real)


def random_opau_case(rng, k=5, l=4, margin=1e-3, x_range=(-3.0, 3.0)):
    """Random safe unit and input at least ``margin`` away from every kink."""
    basis = list(PolyBasis)[rng.integers(len(PolyBasis))]
    c = rng.normal(0.0, 1.0, k + 1)
    d = rng.choice([-1.0, 1.0], l) * rng.uniform(margin, 1.0, l)
    roots = basis_roots(basis, max(k, l))
    while True:
        x = rng.uniform(*x_range)
        if roots.size == 0 or np.min(np.abs(roots - x)) >= margin:
            break
    return OpauParams(basis, c, d, safe=True), float(x)


def fd_opau_gradient(params: OpauParams, x: float, h: float = 1e-5):
    """Central differences of G in x, every c_i and every d_j."""

    def g(p, xv):
        return float(activation_map(p, [xv])[0])

    dx = (g(params, x + h) - g(params, x - h)) / (2 * h)
    dc = np.empty(params.c.size)
    for i in range(params.c.size):
        hi, lo = params.copy(), params.copy()
        hi.c[i] += h
        lo.c[i] -= h
        dc[i] = (g(hi, x) - g(lo, x)) / (2 * h)
    dd = np.empty(params.d.size)
    for j in range(params.d.size):
        hi, lo = params.copy(), params.copy()
        hi.d[j] += h
        lo.d[j] -= h
        dd[j] = (g(hi, x) - g(lo, x)) / (2 * h)
    return dx, dc, dd


def check_opau_gradient(params: OpauParams, x: float, h: float = 1e-5) -> float:
    """Largest relative error over all gradient components at one point."""
    grad = opau_backward(params, x, 1.0)
    fdx, fdc, fdd = fd_opau_gradient(params, x, h)
    errs = relative_error(
        np.r_[grad.d_input, grad.d_c, grad.d_d], np.r_[fdx, fdc, fdd]
    )
    return float(errs.max())


@dataclass
class GradcheckReport:
    samples: int
    max_rel_err: float
    worst_index: int

    def passed(self, tol: float) -> bool:
        return self.max_rel_err <= tol


def gradcheck_random(n: int, seed: int = 0, h: float = 1e-5) -> GradcheckReport:
    rng = np.random.default_rng(seed)
    worst, worst_i = 0.0, -1
    for i in range(n):
        params, x = random_opau_case(rng)
        err = check_opau_gradient(params, x, h)
        if err > worst:
            worst, worst_i = err, i
    return GradcheckReport(n, worst, worst_i)


def gradcheck_params(params: OpauParams, xs, h: float = 1e-5) -> GradcheckReport:
    worst, worst_i = 0.0, -1
    for i, x in enumerate(xs):
        err = check_opau_gradient(params, float(x), h)
        if err > worst:
            worst, worst_i = err, i
    return GradcheckReport(len(xs), worst, worst_i)


def fd_network_gradients(net: Network, x, labels, h: float = 1e-6, reduction="mean"):
    """Central differences of the loss for every scalar parameter."""
    out = {}
    for name, arr in net.parameters().items():
        g = np.empty_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = network_loss(net, network_forward(net, x)[0], labels, reduction)
            flat[i] = orig - h
            lm = network_loss(net, network_forward(net, x)[0], labels, reduction)
            flat[i] = orig
            gflat[i] = (lp - lm) / (2 * h)
        out[name] = g
    net.bump_version()
    return out


def check_network_gradients(net: Network, x, labels, h: float = 1e-6, floor: float = 1e-8):
    """Return ``{name: max relative error}`` between backprop and differences."""
    _, cache = network_forward(net, x)
    analytic = network_backward(net, cache, labels)
    numeric = fd_network_gradients(net, x, labels, h)
    return {
        name: float(relative_error(analytic[name], numeric[name], floor).max())
        for name in analytic
    }

"""Orthogonal polynomial families used by the Padé activation units.

Every family is evaluated through a three-term recurrence of the form::

    f_{n+1}(x) = (A_n x + B_n) f_n(x) - C_n f_{n-1}(x),    f_0 = 1, f_{-1} = 0

so values and first derivatives can be propagated jointly.  The weight
functions and domains are the classical ones under which each family is
orthogonal; they are only used by the quadrature diagnostics.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "PolyBasis",
    "BasisEval",
    "recurrence_coeffs",
    "eval_basis",
    "eval_basis_with_deriv",
    "basis_matrix",
    "monomial_coeffs",
    "values_at_zero",
    "Quadrature",
    "quadrature_rule",
    "inner_product",
    "gram_matrix",
    "normalized_gram",
]


class PolyBasis(str, enum.Enum):
    CP1 = "CP1"
    CP2 = "CP2"
    LAU = "LAU"
    LEG = "LEG"
    HP1 = "HP1"
    HP2 = "HP2"

    @classmethod
    def parse(cls, name: "str | PolyBasis") -> "PolyBasis":
        """Accept ``"HP1"``, ``"hp1"``, ``"HP-1"`` or an existing member."""
        if isinstance(name, cls):
            return name
        key = str(name).upper().replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown basis {name!r}; valid names: {valid}") from None

    @property
    def code(self) -> int:
        """Integer id used by the compiled kernels."""
        return _CODES[self]

    @property
    def domain(self) -> tuple[float, float]:
        return _DOMAINS[self]

    def weight(self, x):
        """Classical orthogonality weight w(x); zero outside the domain."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        inside = (x >= lo) & (x <= hi)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            w = _WEIGHTS[self](x)
        return np.where(inside, w, 0.0)


_CODES = {b: i for i, b in enumerate(PolyBasis)}

_DOMAINS = {
    PolyBasis.CP1: (-1.0, 1.0),
    PolyBasis.CP2: (-1.0, 1.0),
    PolyBasis.LAU: (0.0, math.inf),
    PolyBasis.LEG: (-1.0, 1.0),
    PolyBasis.HP1: (-math.inf, math.inf),
    PolyBasis.HP2: (-math.inf, math.inf),
}

_WEIGHTS: dict[PolyBasis, Callable[[np.ndarray], np.ndarray]] = {
    PolyBasis.CP1: lambda x: 1.0 / np.sqrt(1.0 - x * x),
    PolyBasis.CP2: lambda x: np.sqrt(1.0 - x * x),
    PolyBasis.LAU: lambda x: np.exp(-x),
    PolyBasis.LEG: lambda x: np.ones_like(x),
    PolyBasis.HP1: lambda x: np.exp(-0.5 * x * x),
    PolyBasis.HP2: lambda x: np.exp(-x * x),
}


def recurrence_coeffs(basis: PolyBasis, n: int) -> tuple[float, float, float]:
    """Return ``(A_n, B_n, C_n)`` producing f_{n+1} from f_n and f_{n-1}."""
    if basis is PolyBasis.CP1:
        return (1.0 if n == 0 else 2.0), 0.0, 1.0
    if basis is PolyBasis.CP2:
        return 2.0, 0.0, 1.0
    if basis is PolyBasis.LAU:
        return -1.0 / (n + 1), (2 * n + 1) / (n + 1), n / (n + 1)
    if basis is PolyBasis.LEG:
        return (2 * n + 1) / (n + 1), 0.0, n / (n + 1)
    if basis is PolyBasis.HP1:
        return 1.0, 0.0, float(n)
    if basis is PolyBasis.HP2:
        return 2.0, 0.0, 2.0 * n
    raise ValueError(f"unknown basis {basis!r}")


@dataclass(frozen=True)
class BasisEval:
    values: np.ndarray
    derivs: np.ndarray | None = None


def _check_scalar(n: int, x: float) -> float:
    if n < 0:
        raise ValueError(f"max degree must be >= 0, got {n}")
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x}")
    return x


def eval_basis(basis, n: int, x: float) -> BasisEval:
    """Values f_0(x)..f_n(x) of one family at a scalar point."""
    basis = PolyBasis.parse(basis)
    x = _check_scalar(n, x)
    values = np.empty(n + 1)
    prev, cur = 0.0, 1.0
    values[0] = 1.0
    for m in range(n):
        a, b, c = recurrence_coeffs(basis, m)
        prev, cur = cur, (a * x + b) * cur - c * prev
        values[m + 1] = cur
    return BasisEval(values)


def eval_basis_with_deriv(basis, n: int, x: float) -> BasisEval:
    """Values and first derivatives, propagated through the recurrence."""
    basis = PolyBasis.parse(basis)
    x = _check_scalar(n, x)
    values = np.empty(n + 1)
    derivs = np.empty(n + 1)
    values[0], derivs[0] = 1.0, 0.0
    p, dp = 0.0, 0.0
    f, df = 1.0, 0.0
    for m in range(n):
        a, b, c = recurrence_coeffs(basis, m)
        f_next = (a * x + b) * f - c * p
        df_next = a * f + (a * x + b) * df - c * dp
        p, dp, f, df = f, df, f_next, df_next
        values[m + 1], derivs[m + 1] = f, df
    return BasisEval(values, derivs)


def basis_matrix(basis, n: int, x, with_deriv: bool = False):
    """Vectorised evaluation: arrays of shape ``x.shape + (n + 1,)``."""
    basis = PolyBasis.parse(basis)
    if n < 0:
        raise ValueError(f"max degree must be >= 0, got {n}")
    x = np.asarray(x, dtype=float)
    vals = np.empty(x.shape + (n + 1,))
    vals[..., 0] = 1.0
    ders = np.zeros_like(vals) if with_deriv else None
    for m in range(n):
        a, b, c = recurrence_coeffs(basis, m)
        lin = a * x + b
        prev = vals[..., m - 1] if m > 0 else 0.0
        vals[..., m + 1] = lin * vals[..., m] - c * prev
        if with_deriv:
            dprev = ders[..., m - 1] if m > 0 else 0.0
            ders[..., m + 1] = a * vals[..., m] + lin * ders[..., m] - c * dprev
    return (vals, ders) if with_deriv else vals


def monomial_coeffs(basis, n: int) -> np.ndarray:
    """Power-series coefficients of f_0..f_n.

    Row ``i`` holds the coefficients of f_i in increasing powers of x,
    obtained by convolving the recurrence (no symbolic algebra).
    """
    basis = PolyBasis.parse(basis)
    out = np.zeros((n + 1, n + 1))
    out[0, 0] = 1.0
    for m in range(n):
        a, b, c = recurrence_coeffs(basis, m)
        row = b * out[m]
        row[1:] += a * out[m, :-1]
        if m > 0:
            row -= c * out[m - 1]
        out[m + 1] = row
    return out


def values_at_zero(basis, n: int) -> np.ndarray:
    """f_0(0)..f_n(0); these define the zero-centering constraint."""
    return eval_basis(basis, n, 0.0).values


@dataclass(frozen=True)
class Quadrature:
    """Quadrature settings for the inner-product diagnostics.

    ``rule="gauss"`` uses the Gauss rule matched to the basis weight,
    ``rule="composite"`` a composite Gauss-Legendre rule over the domain,
    truncated at ``|x| = cutoff`` for unbounded domains (and mapped through
    ``x = cos t`` for the Chebyshev weights so the endpoint singularity
    disappears).
    """

    nodes: int = 64
    rule: str = "gauss"
    cutoff: float = 12.0
    panels: int = 48


def quadrature_rule(basis, quad: Quadrature = Quadrature()) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights such that ``sum(w * g(x))`` approximates the weighted integral."""
    from scipy import special

    basis = PolyBasis.parse(basis)
    if quad.nodes < 1:
        raise ValueError(f"quadrature needs at least one node, got {quad.nodes}")
    n = quad.nodes
    if quad.rule == "gauss":
        roots = {
            PolyBasis.CP1: special.roots_chebyt,
            PolyBasis.CP2: special.roots_chebyu,
            PolyBasis.LAU: special.roots_laguerre,
            PolyBasis.LEG: special.roots_legendre,
            PolyBasis.HP1: special.roots_hermitenorm,
            PolyBasis.HP2: special.roots_hermite,
        }[basis]
        x, w = roots(n)
        return np.asarray(x), np.asarray(w)
    if quad.rule != "composite":
        raise ValueError(f"unknown quadrature rule {quad.rule!r}")

    gx, gw = np.polynomial.legendre.leggauss(n)

    def composite(lo, hi):
        edges = np.linspace(lo, hi, quad.panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        xs = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
        ws = (half[:, None] * gw[None, :]).ravel()
        return xs, ws

    if basis in (PolyBasis.CP1, PolyBasis.CP2):
        # x = cos t: dx / sqrt(1-x^2) = dt, sqrt(1-x^2) dx = sin^2 t dt
        t, wt = composite(0.0, math.pi)
        x = np.cos(t)
        w = wt if basis is PolyBasis.CP1 else wt * np.sin(t) ** 2
        return x, w
    if basis is PolyBasis.LAU:
        # e^{-x} decays far slower than the Gaussian weights
        lo, hi = 0.0, 8.0 * quad.cutoff
    elif basis is PolyBasis.LEG:
        lo, hi = -1.0, 1.0
    else:
        lo, hi = -quad.cutoff, quad.cutoff
    x, w = composite(lo, hi)
    return x, w * basis.weight(x)


def inner_product(basis, i: int, j: int, quad: Quadrature = Quadrature()) -> float:
    """Numerical <f_i, f_j>_w over the basis domain."""
    if i < 0 or j < 0:
        raise ValueError("degrees must be non-negative")
    x, w = quadrature_rule(basis, quad)
    vals = basis_matrix(basis, max(i, j), x)
    return float(np.sum(w * vals[:, i] * vals[:, j]))


def gram_matrix(basis, nmax: int, quad: Quadrature = Quadrature()) -> np.ndarray:
    if nmax < 0:
        raise ValueError("nmax must be >= 0")
    x, w = quadrature_rule(basis, quad)
    vals = basis_matrix(basis, nmax, x)
    return (vals * w[:, None]).T @ vals


def normalized_gram(basis, nmax: int, quad: Quadrature = Quadrature()) -> np.ndarray:
    """Gram matrix scaled to unit diagonal: G_ij / sqrt(G_ii G_jj)."""
    g = gram_matrix(basis, nmax, quad)
    s = np.sqrt(np.diag(g))
    return g / np.outer(s, s)

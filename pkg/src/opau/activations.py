"""Padé and orthogonal-Padé activation units plus the baseline activations.

An orthogonal-Padé unit is

    G(x) = P(x) / Q(x),   P(x) = sum_{i=0}^{k} c_i f_i(x)

with ``Q(x) = 1 + sum_j |d_j| |f_j(x)|`` in safe mode (never below 1) or
``Q(x) = 1 + sum_j d_j f_j(x)`` otherwise.  ``f_i`` are polynomials of one
of the orthogonal families in :mod:`opau.bases`.

Gradients use the sgn(0) = 0 convention at the kinks of ``|d_j|`` and
``|f_j(x)|``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bases import PolyBasis
from .kernels import MONO, backend

__all__ = [
    "PoleError",
    "OpauParams",
    "OpauGrad",
    "PauParams",
    "opau_forward",
    "opau_backward",
    "activation_map",
    "activation_backward",
    "pau_forward",
    "pau_backward",
    "pau_map",
    "BASELINES",
    "baseline_forward",
    "baseline_deriv",
    "POLE_THRESHOLD",
]

POLE_THRESHOLD = 1e-12


class PoleError(ArithmeticError):
    """Denominator of a non-safe rational unit vanished."""


def _finite_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(eq=False)
class OpauParams:
    """Trainable state of one orthogonal-Padé unit (shared by a whole layer)."""

    basis: PolyBasis
    c: np.ndarray
    d: np.ndarray
    safe: bool = True

    def __post_init__(self):
        self.basis = PolyBasis.parse(self.basis)
        self.c = _finite_vector(self.c, "c")
        self.d = _finite_vector(self.d, "d")
        if self.c.size < 1:
            raise ValueError("numerator needs at least c_0")
        self.safe = bool(self.safe)

    @property
    def k(self) -> int:
        return self.c.size - 1

    @property
    def l(self) -> int:  # noqa: E743
        return self.d.size

    @property
    def num_params(self) -> int:
        return self.c.size + self.d.size

    @classmethod
    def zeros(cls, basis, k: int = 5, l: int = 4, safe: bool = True) -> "OpauParams":
        return cls(basis, np.zeros(k + 1), np.zeros(l), safe)

    @classmethod
    def constant(cls, basis, value: float = 1.0, k: int = 5, l: int = 4, safe: bool = True):
        c = np.zeros(k + 1)
        c[0] = value
        return cls(basis, c, np.zeros(l), safe)

    def copy(self) -> "OpauParams":
        return OpauParams(self.basis, self.c.copy(), self.d.copy(), self.safe)

    def __eq__(self, other):
        if not isinstance(other, OpauParams):
            return NotImplemented
        return (
            self.basis is other.basis
            and self.safe == other.safe
            and np.array_equal(self.c, other.c)
            and np.array_equal(self.d, other.d)
        )

    def to_dict(self) -> dict:
        return {
            "basis": self.basis.value,
            "k": self.k,
            "l": self.l,
            "c": [float(v) for v in self.c],
            "d": [float(v) for v in self.d],
            "safe": self.safe,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "OpauParams":
        try:
            params = cls(doc["basis"], doc["c"], doc["d"], doc.get("safe", True))
        except KeyError as exc:
            raise ValueError(f"activation parameters missing field {exc}") from None
        for key, actual in (("k", params.k), ("l", params.l)):
            if key in doc and int(doc[key]) != actual:
                raise ValueError(f"{key}={doc[key]} does not match coefficient count")
        return params

    def to_json(self, **kwargs) -> str:
        # repr-based float formatting round-trips binary64 exactly
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "OpauParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class OpauGrad:
    d_input: float
    d_c: np.ndarray
    d_d: np.ndarray


def _as_input(x) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("activation input contains non-finite values")
    return arr


def _pole_check(safe: bool, qmin: float):
    if not safe and qmin < POLE_THRESHOLD:
        raise PoleError(f"denominator |Q(x)| = {qmin:.3g} below {POLE_THRESHOLD:g}")


def activation_map(params: OpauParams, xs) -> np.ndarray:
    """Apply one shared unit element-wise; output has the shape of ``xs``."""
    xs_arr = np.asarray(xs, dtype=np.float64)
    flat = _as_input(xs_arr)
    y, qmin = backend.opau_forward(flat, params.basis.code, params.c, params.d, params.safe)
    _pole_check(params.safe, qmin)
    return y.reshape(xs_arr.shape)


def activation_backward(params: OpauParams, xs, upstream):
    """Return ``(y, dL/dx, dL/dc, dL/dd)`` for a shared unit.

    The parameter gradients are summed over every element of ``xs``.
    """
    xs_arr = np.asarray(xs, dtype=np.float64)
    flat = _as_input(xs_arr)
    g = np.ascontiguousarray(upstream, dtype=np.float64).reshape(-1)
    if g.shape != flat.shape:
        raise ValueError("upstream gradient shape does not match input")
    y, dx, dc, dd, qmin = backend.opau_backward(
        flat, g, params.basis.code, params.c, params.d, params.safe
    )
    _pole_check(params.safe, qmin)
    return y.reshape(xs_arr.shape), dx.reshape(xs_arr.shape), dc, dd


def opau_forward(params: OpauParams, x: float) -> float:
    return float(activation_map(params, [x])[0])


def opau_backward(params: OpauParams, x: float, upstream: float = 1.0) -> OpauGrad:
    _, dx, dc, dd = activation_backward(params, [x], [upstream])
    return OpauGrad(float(dx[0]), dc, dd)


# --- monomial Padé units -------------------------------------------------

PAU_VARIANTS = ("F1", "F2", "F3")


@dataclass(eq=False)
class PauParams:
    """Padé unit in the power basis.

    ``F1`` is the plain rational function, ``F2`` takes the absolute value of
    the whole denominator polynomial, ``F3`` the absolute value of every term.
    """

    a: np.ndarray
    b: np.ndarray
    variant: str = "F3"

    def __post_init__(self):
        self.a = _finite_vector(self.a, "a")
        self.b = _finite_vector(self.b, "b")
        if self.a.size < 1:
            raise ValueError("numerator needs at least a_0")
        self.variant = str(self.variant).upper()
        if self.variant not in PAU_VARIANTS:
            raise ValueError(f"unknown PAU variant {self.variant!r}; use F1, F2 or F3")

    @property
    def k(self) -> int:
        return self.a.size - 1

    @property
    def l(self) -> int:  # noqa: E743
        return self.b.size

    @property
    def num_params(self) -> int:
        return self.a.size + self.b.size

    def copy(self) -> "PauParams":
        return PauParams(self.a.copy(), self.b.copy(), self.variant)

    def to_dict(self) -> dict:
        return {
            "a": [float(v) for v in self.a],
            "b": [float(v) for v in self.b],
            "variant": self.variant,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PauParams":
        return cls(doc["a"], doc["b"], doc.get("variant", "F3"))


def _pau_f2_parts(params: PauParams, x: np.ndarray):
    n = max(params.k, params.l)
    powers = np.vander(x, n + 1, increasing=True)
    p = powers[:, : params.k + 1] @ params.a
    dp = powers[:, : params.k] @ (params.a[1:] * np.arange(1, params.k + 1)) if params.k else 0.0 * x
    s = powers[:, 1 : params.l + 1] @ params.b
    ds = powers[:, : params.l] @ (params.b * np.arange(1, params.l + 1)) if params.l else 0.0 * x
    return powers, p, dp, s, ds


def pau_map(params: PauParams, xs) -> np.ndarray:
    xs_arr = np.asarray(xs, dtype=np.float64)
    flat = _as_input(xs_arr)
    if params.variant == "F2":
        _, p, _, s, _ = _pau_f2_parts(params, flat)
        y = p / (1.0 + np.abs(s))
    else:
        safe = params.variant == "F3"
        y, qmin = backend.opau_forward(flat, MONO, params.a, params.b, safe)
        _pole_check(safe, qmin)
    return y.reshape(xs_arr.shape)


def pau_backward(params: PauParams, xs, upstream):
    """Return ``(y, dL/dx, dL/da, dL/db)``; parameter gradients summed."""
    xs_arr = np.asarray(xs, dtype=np.float64)
    flat = _as_input(xs_arr)
    g = np.ascontiguousarray(upstream, dtype=np.float64).reshape(-1)
    if g.shape != flat.shape:
        raise ValueError("upstream gradient shape does not match input")
    if params.variant == "F2":
        powers, p, dp, s, ds = _pau_f2_parts(params, flat)
        sg = np.sign(s)
        q = 1.0 + np.abs(s)
        y = p / q
        dx = g * (dp / q - p * sg * ds / (q * q))
        da = powers[:, : params.k + 1].T @ (g / q)
        db = -(powers[:, 1 : params.l + 1].T @ (g * sg * p / (q * q)))
    else:
        safe = params.variant == "F3"
        y, dx, da, db, qmin = backend.opau_backward(flat, g, MONO, params.a, params.b, safe)
        _pole_check(safe, qmin)
    return y.reshape(xs_arr.shape), dx.reshape(xs_arr.shape), da, db


def pau_forward(params: PauParams, x: float) -> float:
    return float(pau_map(params, [x])[0])


# --- baselines -------------------------------------------------------------

BASELINES = ("relu", "leaky_relu", "elu", "softplus", "swish", "identity")


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def baseline_forward(kind: str, x, alpha: float | None = None):
    """Standard comparison activations; works on scalars and arrays."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "relu":
        out = np.maximum(x, 0.0)
    elif kind == "leaky_relu":
        a = 0.01 if alpha is None else alpha
        out = np.where(x >= 0, x, a * x)
    elif kind == "elu":
        a = 1.0 if alpha is None else alpha
        out = np.where(x >= 0, x, a * np.expm1(np.minimum(x, 0.0)))
    elif kind == "softplus":
        out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    elif kind == "swish":
        out = x * _sigmoid(x)
    elif kind == "identity":
        out = x.copy()
    else:
        raise ValueError(f"unknown baseline activation {kind!r}; choose from {BASELINES}")
    return float(out) if out.ndim == 0 else out


def baseline_deriv(kind: str, x, alpha: float | None = None):
    """Derivative of :func:`baseline_forward`; the right derivative at 0."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "relu":
        out = (x >= 0).astype(np.float64)
    elif kind == "leaky_relu":
        a = 0.01 if alpha is None else alpha
        out = np.where(x >= 0, 1.0, a)
    elif kind == "elu":
        a = 1.0 if alpha is None else alpha
        out = np.where(x >= 0, 1.0, a * np.exp(np.minimum(x, 0.0)))
    elif kind == "softplus":
        out = _sigmoid(x)
    elif kind == "swish":
        s = _sigmoid(x)
        out = s + x * s * (1.0 - s)
    elif kind == "identity":
        out = np.ones_like(x)
    else:
        raise ValueError(f"unknown baseline activation {kind!r}; choose from {BASELINES}")
    return float(out) if out.ndim == 0 else out

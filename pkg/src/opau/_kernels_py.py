"""Pure numpy implementation of the rational-activation kernels.

Mirrors the compiled ``_kernels`` module function for function; used when
the extension is unavailable or ``OPAU_PURE=1`` is set.
"""
import numpy as np

MONO = 6


def _coeffs(kind, m):
    if kind == 0:
        return (1.0 if m == 0 else 2.0), 0.0, 1.0
    if kind == 1:
        return 2.0, 0.0, 1.0
    if kind == 2:
        return -1.0 / (m + 1), (2 * m + 1) / (m + 1), m / (m + 1)
    if kind == 3:
        return (2 * m + 1) / (m + 1), 0.0, m / (m + 1)
    if kind == 4:
        return 1.0, 0.0, float(m)
    if kind == 5:
        return 2.0, 0.0, 2.0 * m
    if kind == MONO:
        return 1.0, 0.0, 0.0
    raise ValueError(f"unknown basis code {kind}")


def basis_eval(x, kind, n):
    """Return ``(values, derivs)``, each of shape ``(len(x), n + 1)``."""
    x = np.asarray(x, dtype=np.float64)
    vals = np.empty((x.shape[0], n + 1))
    ders = np.empty_like(vals)
    vals[:, 0] = 1.0
    ders[:, 0] = 0.0
    for m in range(n):
        a, b, c = _coeffs(kind, m)
        lin = a * x + b
        if m > 0:
            vals[:, m + 1] = lin * vals[:, m] - c * vals[:, m - 1]
            ders[:, m + 1] = a * vals[:, m] + lin * ders[:, m] - c * ders[:, m - 1]
        else:
            vals[:, m + 1] = lin * vals[:, m]
            ders[:, m + 1] = a * vals[:, m] + lin * ders[:, m]
    return vals, ders


def _parts(x, kind, c, d, safe):
    k, l = c.shape[0] - 1, d.shape[0]
    vals, ders = basis_eval(x, kind, max(k, l))
    p = vals[:, : k + 1] @ c
    dp = ders[:, : k + 1] @ c
    fj = vals[:, 1 : l + 1]
    dfj = ders[:, 1 : l + 1]
    if safe:
        q = 1.0 + np.abs(fj) @ np.abs(d)
        dq = (np.sign(fj) * dfj) @ np.abs(d)
    else:
        q = 1.0 + fj @ d
        dq = dfj @ d
    return vals, p, dp, q, dq


def opau_forward(x, kind, c, d, safe):
    """Return ``(y, min|Q|)``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    d = np.ascontiguousarray(d, dtype=np.float64)
    if x.shape[0] == 0:
        return np.empty(0), np.inf
    _, p, _, q, _ = _parts(x, kind, c, d, safe)
    # unsafe mode may hit a pole; the caller checks min|Q| and raises
    with np.errstate(divide="ignore", invalid="ignore"):
        y = p / q
    return y, float(np.min(np.abs(q)))


def opau_backward(x, upstream, kind, c, d, safe):
    """Return ``(y, dx, dc, dd, min|Q|)``.

    ``dx`` is element-wise; ``dc`` and ``dd`` are summed over all elements
    (one parameter set shared across the array).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    g = np.ascontiguousarray(upstream, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    d = np.ascontiguousarray(d, dtype=np.float64)
    k, l = c.shape[0] - 1, d.shape[0]
    if x.shape[0] == 0:
        return np.empty(0), np.empty(0), np.zeros(k + 1), np.zeros(l), np.inf
    vals, p, dp, q, dq = _parts(x, kind, c, d, safe)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = p / q
        dx = g * (dp / q - p * dq / (q * q))
        dc = vals[:, : k + 1].T @ (g / q)
        s = g * p / (q * q)
    fj = vals[:, 1 : l + 1]
    if safe:
        dd = -np.sign(d) * (np.abs(fj).T @ s)
    else:
        dd = -(fj.T @ s)
    return y, dx, dc, dd, float(np.min(np.abs(q)))

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled rational-activation kernels.

Same contract as ``opau._kernels_py``.  Each element is processed with its
own stack-allocated recurrence buffer, so no (N, n+1) basis matrix is ever
materialised.  Parameter-gradient sums run in index order.
"""
import numpy as np
from libc.math cimport fabs, INFINITY

DEF MAXDEG = 64
MONO = 6


cdef inline void _coeffs(int kind, int m, double* a, double* b, double* c) noexcept nogil:
    if kind == 0:
        a[0] = 1.0 if m == 0 else 2.0
        b[0] = 0.0
        c[0] = 1.0
    elif kind == 1:
        a[0] = 2.0
        b[0] = 0.0
        c[0] = 1.0
    elif kind == 2:
        a[0] = -1.0 / (m + 1)
        b[0] = (2.0 * m + 1.0) / (m + 1)
        c[0] = m / (m + 1.0)
    elif kind == 3:
        a[0] = (2.0 * m + 1.0) / (m + 1)
        b[0] = 0.0
        c[0] = m / (m + 1.0)
    elif kind == 4:
        a[0] = 1.0
        b[0] = 0.0
        c[0] = m
    elif kind == 5:
        a[0] = 2.0
        b[0] = 0.0
        c[0] = 2.0 * m
    else:
        a[0] = 1.0
        b[0] = 0.0
        c[0] = 0.0


cdef inline void _fill(double x, int kind, int n, double* f, double* df) noexcept nogil:
    cdef int m
    cdef double a, b, c, lin
    f[0] = 1.0
    df[0] = 0.0
    for m in range(n):
        _coeffs(kind, m, &a, &b, &c)
        lin = a * x + b
        if m > 0:
            f[m + 1] = lin * f[m] - c * f[m - 1]
            df[m + 1] = a * f[m] + lin * df[m] - c * df[m - 1]
        else:
            f[m + 1] = lin * f[m]
            df[m + 1] = a * f[m] + lin * df[m]


cdef inline double _sgn(double v) noexcept nogil:
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


def _check(int kind, int k, int l):
    if kind < 0 or kind > MONO:
        raise ValueError(f"unknown basis code {kind}")
    if k < 0 or l < 0 or max(k, l) >= MAXDEG:
        raise ValueError(f"degrees must lie in [0, {MAXDEG - 1}]")


def basis_eval(x, int kind, int n):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    _check(kind, n, 0)
    cdef Py_ssize_t N = xv.shape[0], i
    cdef int m
    vals_arr = np.empty((N, n + 1))
    ders_arr = np.empty((N, n + 1))
    cdef double[:, ::1] vals = vals_arr
    cdef double[:, ::1] ders = ders_arr
    cdef double f[MAXDEG]
    cdef double df[MAXDEG]
    with nogil:
        for i in range(N):
            _fill(xv[i], kind, n, f, df)
            for m in range(n + 1):
                vals[i, m] = f[m]
                ders[i, m] = df[m]
    return vals_arr, ders_arr


def opau_forward(x, int kind, c, d, bint safe):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef int k = cv.shape[0] - 1, l = dv.shape[0]
    _check(kind, k, l)
    cdef int n = max(k, l), m
    cdef Py_ssize_t N = xv.shape[0], i
    out = np.empty(N)
    cdef double[::1] y = out
    cdef double f[MAXDEG]
    cdef double df[MAXDEG]
    cdef double p, q, qmin = INFINITY
    with nogil:
        for i in range(N):
            _fill(xv[i], kind, n, f, df)
            p = 0.0
            for m in range(k + 1):
                p += cv[m] * f[m]
            q = 1.0
            if safe:
                for m in range(l):
                    q += fabs(dv[m]) * fabs(f[m + 1])
            else:
                for m in range(l):
                    q += dv[m] * f[m + 1]
            if fabs(q) < qmin:
                qmin = fabs(q)
            y[i] = p / q
    return out, qmin


def opau_backward(x, upstream, int kind, c, d, bint safe):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] gv = np.ascontiguousarray(upstream, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef int k = cv.shape[0] - 1, l = dv.shape[0]
    _check(kind, k, l)
    if gv.shape[0] != xv.shape[0]:
        raise ValueError("upstream gradient length does not match input")
    cdef int n = max(k, l), m
    cdef Py_ssize_t N = xv.shape[0], i
    y_arr = np.empty(N)
    dx_arr = np.empty(N)
    dc_arr = np.zeros(k + 1)
    dd_arr = np.zeros(l)
    cdef double[::1] y = y_arr
    cdef double[::1] dx = dx_arr
    cdef double[::1] dc = dc_arr
    cdef double[::1] dd = dd_arr
    cdef double f[MAXDEG]
    cdef double df[MAXDEG]
    cdef double p, dp, q, dq, g, s, qmin = INFINITY
    with nogil:
        for i in range(N):
            _fill(xv[i], kind, n, f, df)
            p = 0.0
            dp = 0.0
            for m in range(k + 1):
                p += cv[m] * f[m]
                dp += cv[m] * df[m]
            q = 1.0
            dq = 0.0
            if safe:
                for m in range(l):
                    q += fabs(dv[m]) * fabs(f[m + 1])
                    dq += fabs(dv[m]) * _sgn(f[m + 1]) * df[m + 1]
            else:
                for m in range(l):
                    q += dv[m] * f[m + 1]
                    dq += dv[m] * df[m + 1]
            if fabs(q) < qmin:
                qmin = fabs(q)
            g = gv[i]
            y[i] = p / q
            dx[i] = g * (dp / q - p * dq / (q * q))
            for m in range(k + 1):
                dc[m] += f[m] * (g / q)
            s = g * p / (q * q)
            if safe:
                for m in range(l):
                    dd[m] -= _sgn(dv[m]) * fabs(f[m + 1]) * s
            else:
                for m in range(l):
                    dd[m] -= f[m + 1] * s
    return y_arr, dx_arr, dc_arr, dd_arr, qmin

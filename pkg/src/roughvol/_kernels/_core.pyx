# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled single-pass versions of the hot kernels (see _pure.py for contracts)."""

from libc.math cimport log, log1p

import numpy as np


def scan_days(object z_in, object sigma_sqrt_delta, double log_open0, bint multiplicative):
    cdef double[:, ::1] z = np.ascontiguousarray(z_in, dtype=np.float64)
    cdef double[::1] ssd = np.ascontiguousarray(sigma_sqrt_delta, dtype=np.float64)
    cdef Py_ssize_t days = z.shape[0], steps = z.shape[1]
    if ssd.shape[0] != days:
        raise ValueError("sigma_sqrt_delta length must match the day count")

    out_open = np.empty(days)
    out_high = np.empty(days)
    out_low = np.empty(days)
    out_close = np.empty(days)
    out_rv = np.empty(days)
    cdef double[::1] o = out_open, h = out_high, l = out_low, c = out_close, rv = out_rv

    cdef Py_ssize_t b, j
    cdef double lp = log_open0, s, x, local, hi, lo, acc
    with nogil:
        for b in range(days):
            s = ssd[b]
            o[b] = lp
            local = 0.0
            hi = 0.0
            lo = 0.0
            acc = 0.0
            for j in range(steps):
                x = s * z[b, j]
                if multiplicative:
                    x = log1p(x)
                local += x
                acc += x * x
                if local > hi:
                    hi = local
                if local < lo:
                    lo = local
            h[b] = hi
            l[b] = lo
            c[b] = local
            rv[b] = acc
            lp += local
    return out_open, out_high, out_low, out_close, out_rv


def garch_variance_path(object r2_in, double omega, double alpha, double beta, double h0):
    cdef double[::1] r2 = np.ascontiguousarray(r2_in, dtype=np.float64)
    cdef Py_ssize_t n = r2.shape[0], t
    out = np.empty(n)
    cdef double[::1] h = out
    cdef double cur = h0
    with nogil:
        for t in range(n):
            h[t] = cur
            cur = omega + alpha * r2[t] + beta * cur
    return out


def garch_nll(object r2_in, double omega, double alpha, double beta, double h0):
    cdef double[::1] r2 = np.ascontiguousarray(r2_in, dtype=np.float64)
    cdef Py_ssize_t n = r2.shape[0], t
    cdef double h = h0, acc = 0.0
    cdef bint bad = 0
    with nogil:
        for t in range(n):
            if h <= 0.0 or h != h:
                bad = 1
                break
            acc += log(h) + r2[t] / h
            h = omega + alpha * r2[t] + beta * h
    if bad or acc != acc or acc >= 1e300:
        return 1e300
    return acc

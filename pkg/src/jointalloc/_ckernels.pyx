# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scalar kernels; mirrors ``_kernels_py`` operation for operation."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, log, sqrt, fabs, INFINITY, NAN, isnan

cnp.import_array()

cdef double _SERIES_CUTOFF = 1e-2
cdef int _MAX_NEWTON = 200
cdef int _MAX_OUTER = 400


cdef inline double _expm1_minus_x(double u) nogil:
    if fabs(u) < _SERIES_CUTOFF:
        return u * u * (0.5 + u * (1.0 / 6.0 + u * (1.0 / 24.0 + u * (1.0 / 120.0 + u / 720.0))))
    return expm1(u) - u


cdef inline double _psi(double u) nogil:
    if u < _SERIES_CUTOFF:
        return u * u * (0.5 + u * (1.0 / 3.0 + u * (0.125 + u * (1.0 / 30.0 + u / 144.0))))
    return u * exp(u) - expm1(u)


cdef double _rate_exponent(double p, double h, double c) nogil:
    cdef double excess = (h * p - c) / c
    cdef double a, hi, lo, u, g, dg, step, nxt, la
    cdef int it
    if not excess > 0.0:
        return NAN
    a = excess + 1.0
    hi = 2.0 * excess
    if a > 4.0:
        hi = min(hi, 2.0 * log(a))
    while _expm1_minus_x(hi) - excess * hi <= 0.0:
        hi *= 2.0
    lo = 0.0
    u = hi
    if a > 4.0:
        # root of e^u ~ a u; Newton from 2 ln a would crawl down one unit per step
        la = log(a)
        u = min(la + log(la), hi)
    for it in range(_MAX_NEWTON):
        g = _expm1_minus_x(u) - excess * u
        if g > 0.0:
            hi = u
        elif g < 0.0:
            lo = u
        else:
            return u
        dg = expm1(u) - excess
        if dg > 0.0:
            step = g / dg
        else:
            step = INFINITY
        nxt = u - step
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if fabs(nxt - u) <= 4e-16 * u or hi - lo <= 4e-16 * hi:
            return nxt
        u = nxt
    return u


cdef double _psi_inverse(double y) nogil:
    cdef double hi, lo, u, g, dg, nxt
    cdef int it
    if y >= exp(2.0):
        hi = log(y)
    else:
        hi = sqrt(2.0 * y)
    while _psi(hi) < y:
        hi *= 2.0
    lo = 0.0
    u = hi
    for it in range(_MAX_NEWTON):
        g = _psi(u) - y
        if g > 0.0:
            hi = u
        elif g < 0.0:
            lo = u
        else:
            return u
        dg = u * exp(u)
        nxt = u - g / dg
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if fabs(nxt - u) <= 4e-16 * u or hi - lo <= 4e-16 * hi:
            return nxt
        u = nxt
    return u


def rate_exponent(double p, double h, double c):
    return _rate_exponent(p, h, c)


def min_bandwidth(double p, double h, double c):
    cdef double u = _rate_exponent(p, h, c)
    if isnan(u):
        return INFINITY
    return c / u


def inv_min_bandwidth(double w, double h, double c):
    return expm1(c / w) * w / h


def psi_inverse(double y):
    return _psi_inverse(y)


cdef double _power_sum(double log_lam, const double[:] h, const double[:] c,
                       Py_ssize_t n, double[:] us, double* slope) nogil:
    cdef double lam = exp(log_lam)
    cdef double total = 0.0
    cdef double sl = 0.0
    cdef double y, u
    cdef Py_ssize_t i
    for i in range(n):
        y = h[i] / lam
        u = _psi_inverse(y)
        us[i] = u
        total += expm1(u) * c[i] / (u * h[i])
        sl -= (c[i] / h[i]) * y * y / (u * u * u * exp(u))
    slope[0] = sl
    return total


def solve_single_source(h_in, c_in, double budget):
    cdef const double[:] h = np.ascontiguousarray(h_in, dtype=np.float64)
    cdef const double[:] c = np.ascontiguousarray(c_in, dtype=np.float64)
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t i
    cdef double floor = 0.0
    cdef double u, lam, tot_w, total, slope, target, s, s_lo, s_hi, step, f, nxt
    cdef int it
    p_arr = np.zeros(n)
    w_arr = np.zeros(n)
    us_arr = np.zeros(n)
    cdef double[:] p = p_arr
    cdef double[:] w = w_arr
    cdef double[:] us = us_arr
    if n == 0:
        return p_arr, w_arr, 0.0, 0.0
    for i in range(n):
        floor += c[i] / h[i]
    if not floor < budget:
        w_arr[:] = INFINITY
        return p_arr, w_arr, INFINITY, INFINITY
    if n == 1:
        u = _rate_exponent(budget, h[0], c[0])
        p[0] = budget
        w[0] = c[0] / u
        lam = h[0] / _psi(u)
        return p_arr, w_arr, lam, w[0]

    with nogil:
        target = log(budget)
        s = 0.0
        total = _power_sum(s, h, c, n, us, &slope)
        step = log(2.0)
        if total >= budget:
            s_lo = s
            s_hi = s + step
            while True:
                total = _power_sum(s_hi, h, c, n, us, &slope)
                if total <= budget:
                    break
                s_lo = s_hi
                step *= 2.0
                s_hi += step
        else:
            s_hi = s
            s_lo = s - step
            while True:
                total = _power_sum(s_lo, h, c, n, us, &slope)
                if total >= budget:
                    break
                s_hi = s_lo
                step *= 2.0
                s_lo -= step
        s = 0.5 * (s_lo + s_hi)
        for it in range(_MAX_OUTER):
            total = _power_sum(s, h, c, n, us, &slope)
            f = log(total) - target
            if f > 0.0:
                s_lo = s
            elif f < 0.0:
                s_hi = s
            else:
                break
            if fabs(f) <= 1e-15:
                break
            nxt = s - f * total / slope
            if not (s_lo < nxt < s_hi):
                nxt = 0.5 * (s_lo + s_hi)
            if s_hi - s_lo <= 1e-15 * max(1.0, fabs(s)):
                break
            s = nxt
        lam = exp(s)
        tot_w = 0.0
        for i in range(n):
            u = us[i]
            w[i] = c[i] / u
            p[i] = expm1(u) * w[i] / h[i]
            tot_w += w[i]
    return p_arr, w_arr, lam, tot_w

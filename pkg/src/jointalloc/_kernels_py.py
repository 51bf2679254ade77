"""Pure-Python scalar kernels.

Reference implementation of the inner loops used by the bandwidth oracle.
The compiled twin in ``_ckernels.pyx`` mirrors this file operation for
operation; keep the two in sync.

All gains passed here are noise-normalised (``h / N0``).
"""

import math

import numpy as np

_SERIES_CUTOFF = 1e-2
_MAX_NEWTON = 200
_MAX_OUTER = 400


_EXP_MAX = 709.782712893384  # ln(DBL_MAX)


def _exp(u):
    # saturate to inf like the C library instead of raising
    return math.exp(u) if u < _EXP_MAX else math.inf


def _expm1(u):
    return math.expm1(u) if u < _EXP_MAX else math.inf


def _expm1_minus_x(u):
    # e^u - 1 - u without cancellation near 0
    if abs(u) < _SERIES_CUTOFF:
        return u * u * (0.5 + u * (1.0 / 6.0 + u * (1.0 / 24.0 + u * (1.0 / 120.0 + u / 720.0))))
    return _expm1(u) - u


def _psi(u):
    # e^u (u - 1) + 1, the marginal-power term of the inverse demand curve
    if u < _SERIES_CUTOFF:
        return u * u * (0.5 + u * (1.0 / 3.0 + u * (0.125 + u * (1.0 / 30.0 + u / 144.0))))
    return u * _exp(u) - _expm1(u)


def rate_exponent(p, h, c):
    """Return ``u = c / w`` where ``w`` is the minimum bandwidth for power ``p``.

    Solves ``e^u - 1 = (h p / c) u`` for its positive root.  Returns ``nan``
    when ``p <= c / h`` (no finite bandwidth suffices).
    """
    excess = (h * p - c) / c  # a - 1
    if not excess > 0.0:
        return math.nan
    a = excess + 1.0
    hi = 2.0 * excess
    if a > 4.0:
        hi = min(hi, 2.0 * math.log(a))
    while _expm1_minus_x(hi) - excess * hi <= 0.0:
        hi *= 2.0
    lo = 0.0
    u = hi
    if a > 4.0:
        # root of e^u ~ a u; Newton from 2 ln a would crawl down one unit per step
        la = math.log(a)
        u = min(la + math.log(la), hi)
    for _ in range(_MAX_NEWTON):
        g = _expm1_minus_x(u) - excess * u
        if g > 0.0:
            hi = u
        elif g < 0.0:
            lo = u
        else:
            return u
        dg = _expm1(u) - excess
        step = g / dg if dg > 0.0 else math.inf
        nxt = u - step
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - u) <= 4e-16 * u or hi - lo <= 4e-16 * hi:
            return nxt
        u = nxt
    return u


def min_bandwidth(p, h, c):
    """Minimum bandwidth ``w`` with ``w ln(1 + h p / w) = c``; ``inf`` if unreachable."""
    u = rate_exponent(p, h, c)
    if math.isnan(u):
        return math.inf
    return c / u


def inv_min_bandwidth(w, h, c):
    """Power needed to reach capacity ``c`` on bandwidth ``w``."""
    return _expm1(c / w) * w / h


def psi_inverse(y):
    """Positive root ``u`` of ``e^u (u - 1) + 1 = y`` for ``y > 0``."""
    if y >= _exp(2.0):
        hi = math.log(y)
    else:
        hi = math.sqrt(2.0 * y)
    while _psi(hi) < y:
        hi *= 2.0
    lo = 0.0
    u = hi
    for _ in range(_MAX_NEWTON):
        g = _psi(u) - y
        if g > 0.0:
            hi = u
        elif g < 0.0:
            lo = u
        else:
            return u
        dg = u * _exp(u)
        nxt = u - g / dg
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - u) <= 4e-16 * u or hi - lo <= 4e-16 * hi:
            return nxt
        u = nxt
    return u


def _power_sum(log_lam, h, c, n, us):
    lam = _exp(log_lam)
    total = 0.0
    slope = 0.0
    for i in range(n):
        y = h[i] / lam
        u = psi_inverse(y)
        us[i] = u
        total += _expm1(u) * c[i] / (u * h[i])
        slope -= (c[i] / h[i]) * y * y / (u * u * u * _exp(u))
    return total, slope


def solve_single_source(h, c, budget):
    """Minimise total bandwidth for users sharing one power budget.

    Parameters
    ----------
    h, c : sequence of float
        Normalised gains and capacity thresholds.
    budget : float
        Power budget of the source.

    Returns
    -------
    p, w : np.ndarray
        Optimal powers and bandwidths (``inf`` bandwidths when infeasible).
    lam : float
        Bandwidth-per-unit-power multiplier of the budget constraint.
    total : float
        ``sum(w)``, ``inf`` when infeasible.
    """
    n = len(h)
    p = np.zeros(n)
    w = np.zeros(n)
    if n == 0:
        return p, w, 0.0, 0.0
    floor = 0.0
    for i in range(n):
        floor += c[i] / h[i]
    if not floor < budget:
        w[:] = math.inf
        return p, w, math.inf, math.inf
    if n == 1:
        u = rate_exponent(budget, h[0], c[0])
        p[0] = budget
        w[0] = c[0] / u
        lam = h[0] / _psi(u)
        return p, w, lam, w[0]

    us = [0.0] * n
    target = math.log(budget)
    # bracket log(lam): sum p is decreasing in lam
    s = 0.0
    total, slope = _power_sum(s, h, c, n, us)
    step = math.log(2.0)
    if total >= budget:
        s_lo = s
        s_hi = s + step
        while True:
            total, slope = _power_sum(s_hi, h, c, n, us)
            if total <= budget:
                break
            s_lo = s_hi
            step *= 2.0
            s_hi += step
    else:
        s_hi = s
        s_lo = s - step
        while True:
            total, slope = _power_sum(s_lo, h, c, n, us)
            if total >= budget:
                break
            s_hi = s_lo
            step *= 2.0
            s_lo -= step
    s = 0.5 * (s_lo + s_hi)
    for _ in range(_MAX_OUTER):
        total, slope = _power_sum(s, h, c, n, us)
        f = math.log(total) - target
        if f > 0.0:
            s_lo = s
        elif f < 0.0:
            s_hi = s
        else:
            break
        if abs(f) <= 1e-15:
            break
        nxt = s - f * total / slope
        if not (s_lo < nxt < s_hi):
            nxt = 0.5 * (s_lo + s_hi)
        if s_hi - s_lo <= 1e-15 * max(1.0, abs(s)):
            break
        s = nxt
    lam = _exp(s)
    tot_w = 0.0
    for i in range(n):
        u = us[i]
        w[i] = c[i] / u
        p[i] = _expm1(u) * w[i] / h[i]
        tot_w += w[i]
    return p, w, lam, tot_w

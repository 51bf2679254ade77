"""Shannon capacity of a frequency slice and the minimum-bandwidth curve.

Capacities are in nats per second: ``C = w ln(1 + h p / (w N0))``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import InfeasiblePowerError, InvalidInputError


def _check_nonneg(**kw):
    for name, v in kw.items():
        if not v >= 0:
            raise InvalidInputError(f"{name} must be nonnegative (got {v!r})")


def _check_pos(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise InvalidInputError(f"{name} must be positive (got {v!r})")


def link_capacity(p: float, w: float, h: float, n0: float = 1.0) -> float:
    """Capacity of one link; exactly 0 when either ``p`` or ``w`` is 0."""
    _check_nonneg(p=p, w=w)
    _check_pos(h=h, n0=n0)
    if p == 0 or w == 0:
        return 0.0
    return w * math.log1p(h * p / (w * n0))


def link_capacity_array(p, w, h, n0: float = 1.0) -> np.ndarray:
    """Vectorised :func:`link_capacity` (no input checks)."""
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    h = np.asarray(h, dtype=float)
    out = np.zeros(np.broadcast(p, w, h).shape)
    mask = np.broadcast_to((p > 0) & (w > 0), out.shape)
    pb, wb, hb = (np.broadcast_to(a, out.shape) for a in (p, w, h))
    out[mask] = wb[mask] * np.log1p(hb[mask] * pb[mask] / (wb[mask] * n0))
    return out


def two_hop_capacity(p_s, w_s, h_sr, p_r, w_r, h_rd, n0: float = 1.0) -> float:
    """Decode-and-forward end-to-end capacity: the weaker of the two hops."""
    return min(link_capacity(p_s, w_s, h_sr, n0), link_capacity(p_r, w_r, h_rd, n0))


def min_bandwidth(p: float, h: float, c: float) -> float:
    """Smallest bandwidth on which power ``p`` carries capacity ``c``.

    ``h`` is the noise-normalised gain.  The curve exists only above the
    power floor ``c / h``; at or below it :class:`InfeasiblePowerError` is
    raised.
    """
    _check_pos(h=h, c=c)
    floor = c / h
    if not p > floor:
        raise InfeasiblePowerError(p, floor)
    w = kernels.min_bandwidth(float(p), float(h), float(c))
    if not math.isfinite(w):  # rounding at the floor itself
        raise InfeasiblePowerError(p, floor)
    return w


def inv_min_bandwidth(w: float, h: float, c: float) -> float:
    """Power needed to carry capacity ``c`` on bandwidth ``w``: ``(e^{c/w} - 1) w / h``."""
    _check_pos(w=w, h=h, c=c)
    return kernels.inv_min_bandwidth(float(w), float(h), float(c))


def min_bandwidth_derivative(p: float, h: float, c: float) -> float:
    """``dF/dp`` of the minimum-bandwidth curve (negative)."""
    w = min_bandwidth(p, h, c)
    x = h * p / w
    dcdp = h / (1.0 + x)
    dcdw = math.log1p(x) - x / (1.0 + x)
    return -dcdp / dcdw


class CapacityDerivatives(NamedTuple):
    dp: float
    dw: float
    dpp: float
    dpw: float
    dww: float

    @property
    def gradient(self) -> np.ndarray:
        return np.array([self.dp, self.dw])

    @property
    def hessian(self) -> np.ndarray:
        return np.array([[self.dpp, self.dpw], [self.dpw, self.dww]])


def capacity_gradients(p: float, w: float, h: float, n0: float = 1.0) -> CapacityDerivatives:
    """Analytic first and second derivatives of the link capacity.

    The Hessian is rank one (``dpp * dww == dpw**2``) and negative
    semidefinite.
    """
    _check_pos(p=p, w=w, h=h, n0=n0)
    k = h / n0
    s = w + k * p
    x = k * p / w
    return CapacityDerivatives(
        dp=k * w / s,
        dw=math.log1p(x) - x / (1.0 + x),
        dpp=-k * k * w / (s * s),
        dpw=k * k * p / (s * s),
        dww=-k * k * p * p / (w * s * s),
    )

"""Minimum total bandwidth needed to meet every threshold in a user set.

For users sharing one power budget the problem

    minimise  sum_i F_i(p_i)   subject to  sum_i p_i <= P

is solved through its dual: for a price ``lam`` (bandwidth saved per unit of
power) each user's optimal bandwidth follows from a scalar equation, and
``lam`` is searched until the budget is exactly spent.  Users of different
transmitters never interact, so a set's demand is the sum over transmitters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import InvalidInputError
from .model import ChannelGains, NetworkTopology, PhaseView, phase_view, phases_of


@dataclass(frozen=True)
class BandwidthDemand:
    """Result of the bandwidth oracle.

    ``p`` and ``w`` are indexed like the requested users; ``dual`` holds one
    multiplier per transmitter involved (``inf`` for an infeasible one).
    An infeasible demand has ``total == inf``.
    """

    p: np.ndarray
    w: np.ndarray
    total: float
    dual: np.ndarray
    feasible: bool
    users: tuple[int, ...] = ()

    @classmethod
    def empty(cls) -> "BandwidthDemand":
        z = np.zeros(0)
        return cls(z, z, 0.0, z, True, ())


def min_bandwidth_one_source(users: Sequence[tuple[float, float]], power_budget: float) -> BandwidthDemand:
    """Bandwidth demand of users ``(h, c)`` sharing one power budget.

    Infeasible (``total = inf``) when the power floors ``sum c/h`` reach the
    budget.
    """
    if not power_budget > 0:
        raise InvalidInputError(f"power_budget must be positive (got {power_budget!r})")
    h = np.array([u[0] for u in users], dtype=float)
    c = np.array([u[1] for u in users], dtype=float)
    if np.any(~(h > 0)) or np.any(~(c > 0)) or np.any(~np.isfinite(h)) or np.any(~np.isfinite(c)):
        raise InvalidInputError("gains and thresholds must be positive and finite")
    p, w, lam, total = kernels.solve_single_source(h, c, float(power_budget))
    feasible = math.isfinite(total)
    return BandwidthDemand(np.asarray(p), np.asarray(w), float(total),
                           np.array([lam]), feasible)


def power_floor_excess(h, c, budget: float) -> float:
    """``sum(c/h) - budget``; positive means no allocation can serve the set."""
    return float(np.sum(np.asarray(c) / np.asarray(h))) - budget


class PhaseOracle:
    """Memoised per-transmitter bandwidth demands for one phase.

    Subsets are identified by user indices into the topology.  Each distinct
    (transmitter, subset) pair is solved once; ``solves`` counts the actual
    dual solves performed.
    """

    def __init__(self, view: PhaseView, thresholds):
        self.view = view
        self.h = view.normalized_gains
        self.c = np.asarray(thresholds, dtype=float)
        if self.c.shape != self.h.shape:
            raise InvalidInputError("thresholds and gains differ in length")
        self.owner = view.owner
        self.solves = 0
        self._memo: dict[tuple[int, frozenset], tuple[float, float, np.ndarray, np.ndarray, float]] = {}

    def group(self, subset: Iterable[int]) -> dict[int, frozenset]:
        groups: dict[int, set] = {}
        for i in subset:
            groups.setdefault(int(self.owner[i]), set()).add(int(i))
        return {k: frozenset(v) for k, v in groups.items()}

    def solve(self, k: int, members: frozenset):
        """Return ``(total, excess, p, w, lam)`` for transmitter ``k`` serving ``members``."""
        key = (k, members)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        idx = np.array(sorted(members), dtype=np.intp)
        budget = float(self.view.budgets[k])
        if idx.size == 0:
            res = (0.0, -budget, np.zeros(0), np.zeros(0), 0.0)
        else:
            hs, cs = self.h[idx], self.c[idx]
            p, w, lam, total = kernels.solve_single_source(hs, cs, budget)
            self.solves += 1
            res = (float(total), power_floor_excess(hs, cs, budget), np.asarray(p), np.asarray(w), float(lam))
        self._memo[key] = res
        return res

    def total(self, subset: Iterable[int]) -> float:
        return sum(self.solve(k, m)[0] for k, m in self.group(subset).items())

    def demand(self, subset: Iterable[int]) -> BandwidthDemand:
        subset = sorted(int(i) for i in subset)
        if not subset:
            return BandwidthDemand.empty()
        pos = {u: j for j, u in enumerate(subset)}
        p = np.zeros(len(subset))
        w = np.zeros(len(subset))
        duals = []
        total = 0.0
        for k, members in sorted(self.group(subset).items()):
            t, _, pk, wk, lam = self.solve(k, members)
            for j, i in enumerate(sorted(members)):
                p[pos[i]] = pk[j]
                w[pos[i]] = wk[j]
            duals.append(lam)
            total += t
        return BandwidthDemand(p, w, total, np.array(duals), math.isfinite(total), tuple(subset))


def min_total_bandwidth(topology: NetworkTopology, gains: ChannelGains,
                        thresholds=None, subset: Optional[Iterable[int]] = None,
                        phase: Optional[str] = None) -> BandwidthDemand:
    """Bandwidth demand G(I) of the users with indices ``subset`` (default: all).

    For relay topologies ``phase`` selects the hop (``"source"`` or
    ``"relay"``); it defaults to the first hop.
    """
    if thresholds is None:
        thresholds = topology.thresholds()
    if phase is None:
        phase = phases_of(topology)[0]
    oracle = PhaseOracle(phase_view(topology, gains, phase), thresholds)
    if subset is None:
        subset = range(topology.n_users)
    return oracle.demand(subset)

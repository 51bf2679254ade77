"""Admission control: which users can be served at their thresholds.

A user set is admissible when its bandwidth demand G fits into ``W``.  The
greedy search drops one user at a time, always the one whose removal leaves
the smallest demand; the exhaustive search scans subsets by decreasing size.
With relaying both hops must fit.

When some transmitter cannot meet its users' power floors at any bandwidth
its demand is infinite.  Candidate removals are then ranked by the key
``(number of infeasible transmitters, total floor excess, finite demand)``
so the search still makes progress towards a feasible set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .bandwidth_min import PhaseOracle
from .errors import InstanceTooLargeError, InvalidInputError
from .model import (
    PHASE_DIRECT,
    PHASE_RELAY,
    PHASE_SOURCE,
    ChannelGains,
    NetworkTopology,
    ensure_valid,
    phase_view,
)

EXHAUSTIVE_CAP = 16
TIE_TOL = 1e-9


class RemovalStep(NamedTuple):
    user: int
    g_before: float
    g_after: float


@dataclass
class AdmissionResult:
    """Outcome of one admission run.

    ``oracle_calls`` counts demand evaluations made to rank candidates (one
    per candidate removal, or one per subset and hop in the exhaustive
    scan).  The initial check of the full set is counted separately in
    ``baseline_calls``; ``subproblem_solves`` is the number of distinct
    per-transmitter solves after memoisation.
    """

    admitted: tuple[int, ...]
    removal_trace: list[RemovalStep]
    t_star: int
    oracle_calls: int
    baseline_calls: int = 0
    subproblem_solves: int = 0
    demand: float = 0.0
    optimal_flag: Optional[bool] = None
    details: dict = field(default_factory=dict)

    @property
    def n_admitted(self) -> int:
        return len(self.admitted)


def _close(a: float, b: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= TIE_TOL * max(1.0, abs(a), abs(b))


def _less(a: tuple, b: tuple) -> bool:
    """Lexicographic ``a < b`` treating near-equal floats as equal."""
    for x, y in zip(a, b):
        if not _close(x, y):
            return x < y
    return False


class _SetState:
    """Per-transmitter demand of a user set, updated one removal at a time."""

    def __init__(self, oracle: PhaseOracle, members: Sequence[int]):
        self.oracle = oracle
        self.groups = oracle.group(members)
        self.parts = {k: oracle.solve(k, m)[:2] for k, m in self.groups.items()}

    @staticmethod
    def key_of(parts) -> tuple:
        n_inf, excess, finite = 0, 0.0, 0.0
        for total, exc in parts.values():
            if math.isinf(total):
                n_inf += 1
                excess += exc
            else:
                finite += total
        return (n_inf, excess, finite)

    @staticmethod
    def demand_of(key) -> float:
        return math.inf if key[0] else key[2]

    def key(self) -> tuple:
        return self.key_of(self.parts)

    def key_without(self, i: int) -> tuple:
        k = int(self.oracle.owner[i])
        parts = dict(self.parts)
        parts[k] = self.oracle.solve(k, self.groups[k] - {i})[:2]
        return self.key_of(parts)

    def remove(self, i: int) -> None:
        k = int(self.oracle.owner[i])
        self.groups[k] = self.groups[k] - {i}
        self.parts[k] = self.oracle.solve(k, self.groups[k])[:2]


def _greedy(oracle: PhaseOracle, ids: Sequence[int], W: float):
    """Greedy removal on one hop; returns (remaining indices, trace, calls)."""
    current = set(range(len(ids)))
    state = _SetState(oracle, sorted(current))
    key = state.key()
    trace: list[RemovalStep] = []
    calls = 0
    while not _SetState.demand_of(key) <= W:
        best = best_key = None
        # higher ids first: on a tie the earlier candidate is kept
        for i in sorted(current, key=lambda j: -ids[j]):
            cand = state.key_without(i)
            calls += 1
            if best is None or _less(cand, best_key):
                best, best_key = i, cand
        trace.append(RemovalStep(ids[best], _SetState.demand_of(key), _SetState.demand_of(best_key)))
        state.remove(best)
        current.discard(best)
        key = best_key
    return current, trace, calls, _SetState.demand_of(key)


def _exhaustive(oracles: Sequence[PhaseOracle], ids: Sequence[int], W: float, sizes):
    """First size in ``sizes`` with a subset fitting every hop; least total demand wins."""
    order = sorted(range(len(ids)), key=lambda j: ids[j])
    calls = 0
    for size in sizes:
        best = best_score = None
        for combo in combinations(order, size):
            totals = []
            for o in oracles:
                totals.append(o.total(combo))
                calls += 1
                if not totals[-1] <= W:
                    break
            else:
                score = (sum(totals),)
                if best is None or _less(score, best_score):
                    best, best_score = combo, score
        if best is not None:
            return set(best), calls, best_score[0], size
    return set(), calls, 0.0, 0


def _thresholds(topology: NetworkTopology, thresholds) -> np.ndarray:
    if thresholds is None:
        return topology.thresholds()
    c = np.broadcast_to(np.asarray(thresholds, dtype=float), (topology.n_users,)).copy()
    if not np.all(np.isfinite(c) & (c > 0)):
        raise InvalidInputError("thresholds must be positive and finite")
    return c


def _ids_of(topology, idx) -> tuple[int, ...]:
    ids = topology.user_ids
    return tuple(sorted(ids[i] for i in idx))


def _check_bandwidth(W):
    if not (math.isfinite(W) and W >= 0):
        raise InvalidInputError(f"bandwidth must be nonnegative and finite (got {W!r})")


def greedy_admission_no_relay(topology: NetworkTopology, gains: ChannelGains,
                              thresholds=None, bandwidth: Optional[float] = None) -> AdmissionResult:
    """Greedy user removal until the remaining set's demand fits ``W``.

    ``bandwidth`` overrides the topology's total bandwidth.
    """
    ensure_valid(topology, gains, relay=False)
    W = topology.total_bandwidth if bandwidth is None else float(bandwidth)
    _check_bandwidth(W)
    oracle = PhaseOracle(phase_view(topology, gains, PHASE_DIRECT), _thresholds(topology, thresholds))
    ids = topology.user_ids
    kept, trace, calls, demand = _greedy(oracle, ids, W)
    return AdmissionResult(_ids_of(topology, kept), trace, len(trace), calls,
                           baseline_calls=1, subproblem_solves=oracle.solves, demand=demand)


def exhaustive_admission_no_relay(topology: NetworkTopology, gains: ChannelGains,
                                  thresholds=None, bandwidth: Optional[float] = None,
                                  cap: int = EXHAUSTIVE_CAP) -> AdmissionResult:
    """Largest admissible set by scanning subset sizes downwards.

    Among feasible sets of the winning size the least demand wins, then the
    lexicographically smallest ids.  Raises :class:`InstanceTooLargeError`
    beyond ``cap`` users.
    """
    ensure_valid(topology, gains, relay=False)
    n = topology.n_users
    if n > cap:
        raise InstanceTooLargeError(f"exhaustive search over {n} users exceeds the cap of {cap}")
    W = topology.total_bandwidth if bandwidth is None else float(bandwidth)
    _check_bandwidth(W)
    oracle = PhaseOracle(phase_view(topology, gains, PHASE_DIRECT), _thresholds(topology, thresholds))
    best, calls, demand, d_star = _exhaustive([oracle], topology.user_ids, W, range(n, -1, -1))
    return AdmissionResult(_ids_of(topology, best), [], n - d_star, calls,
                           subproblem_solves=oracle.solves, demand=demand,
                           optimal_flag=True, details={"d_star": d_star})


def _relay_oracles(topology, gains, thresholds):
    c = _thresholds(topology, thresholds)
    return (PhaseOracle(phase_view(topology, gains, PHASE_SOURCE), c),
            PhaseOracle(phase_view(topology, gains, PHASE_RELAY), c))


def greedy_admission_relay(topology: NetworkTopology, gains: ChannelGains,
                           thresholds=None, bandwidth: Optional[float] = None,
                           cap: int = EXHAUSTIVE_CAP) -> AdmissionResult:
    """Two-hop admission: greedy per hop, then a capped joint search.

    Each hop is reduced greedily on its own, removing ``t1`` and ``t2``
    users.  If either removed anyone, subsets of size at most
    ``d' = min(N - t1, N - t2)`` are scanned downwards until one fits both
    hops.  ``details`` records ``t1``, ``t2``, ``d_prime`` and whether the
    joint stage ran.
    """
    ensure_valid(topology, gains, relay=True)
    W = topology.total_bandwidth if bandwidth is None else float(bandwidth)
    _check_bandwidth(W)
    o1, o2 = _relay_oracles(topology, gains, thresholds)
    ids = topology.user_ids
    n = topology.n_users
    _, trace1, calls1, g1 = _greedy(o1, ids, W)
    _, trace2, calls2, g2 = _greedy(o2, ids, W)
    t1, t2 = len(trace1), len(trace2)
    d_prime = min(n - t1, n - t2)
    details = {"t1": t1, "t2": t2, "d_prime": d_prime, "phase_traces": (trace1, trace2),
               "phase_calls": (calls1, calls2), "joint_stage": False}
    calls = calls1 + calls2
    if d_prime == n:
        admitted, demand = set(range(n)), g1 + g2
    else:
        if n > cap:
            raise InstanceTooLargeError(f"joint stage over {n} users exceeds the cap of {cap}")
        admitted, joint_calls, demand, _ = _exhaustive([o1, o2], ids, W, range(d_prime, -1, -1))
        calls += joint_calls
        details["joint_stage"] = True
        details["joint_calls"] = joint_calls
    return AdmissionResult(_ids_of(topology, admitted), trace1 + trace2, n - len(admitted), calls,
                           baseline_calls=2, subproblem_solves=o1.solves + o2.solves,
                           demand=demand, details=details)


def exhaustive_admission_relay(topology: NetworkTopology, gains: ChannelGains,
                               thresholds=None, bandwidth: Optional[float] = None,
                               cap: int = EXHAUSTIVE_CAP) -> AdmissionResult:
    """Largest set fitting both hops, by a full scan from size ``N`` down."""
    ensure_valid(topology, gains, relay=True)
    n = topology.n_users
    if n > cap:
        raise InstanceTooLargeError(f"exhaustive search over {n} users exceeds the cap of {cap}")
    W = topology.total_bandwidth if bandwidth is None else float(bandwidth)
    _check_bandwidth(W)
    o1, o2 = _relay_oracles(topology, gains, thresholds)
    best, calls, demand, d_star = _exhaustive([o1, o2], topology.user_ids, W, range(n, -1, -1))
    return AdmissionResult(_ids_of(topology, best), [], n - d_star, calls,
                           subproblem_solves=o1.solves + o2.solves, demand=demand,
                           optimal_flag=True, details={"d_star": d_star})


def compare_with_exhaustive(greedy: AdmissionResult, exhaustive: AdmissionResult) -> bool:
    """Set ``greedy.optimal_flag``: true iff greedy found a best set.

    A best set has the exhaustive optimum's size and its demand (ties within
    the tie tolerance count as equal).
    """
    flag = greedy.n_admitted == exhaustive.n_admitted and _close(greedy.demand, exhaustive.demand)
    greedy.optimal_flag = flag
    greedy.details["exhaustive_admitted"] = exhaustive.admitted
    return flag


def greedy_call_bound(n: int, t_star: int) -> int:
    """Candidate evaluations a greedy run of ``t_star`` removals may make."""
    return sum(n - i for i in range(t_star))


def exhaustive_call_bound(n: int, d_star: int) -> int:
    return sum(math.comb(n, i) for i in range(d_star, n + 1))


def relay_call_bound(n: int, t1: int, t2: int, d_star: int) -> int:
    """Bound for the two-hop pipeline given the true joint optimum ``d_star``."""
    d_prime = min(n - t1, n - t2)
    base = greedy_call_bound(n, t1) + greedy_call_bound(n, t2)
    if d_prime >= d_star:
        return base + 2 * sum(math.comb(n, i) for i in range(d_star, d_prime + 1))
    return base + 2 * math.comb(n, d_prime)


# --------------------------------------------------------------------------
# optimality analysis


class PairRelation(NamedTuple):
    """How two users' minimum-bandwidth curves compare.

    ``kind`` is ``"intersect"``, ``"i-dominates"`` (user i needs less
    bandwidth at every power), ``"j-dominates"`` or ``"identical"``.  For an
    intersection ``crossing`` is the power where the curves meet and
    ``inside`` tells whether it lies strictly inside ``(0, power_cap)``.
    """

    kind: str
    crossing: Optional[float] = None
    inside: bool = False


def _crossing_power(h_lo, c_lo, h_hi, c_hi) -> float:
    """Power at which the curves of the weaker and stronger user meet."""
    log_r = math.log(c_hi / c_lo)

    def f(s):
        x = math.exp(s)
        return math.log(math.log1p(h_hi * x)) - math.log(math.log1p(h_lo * x)) - log_r

    lo, hi = -40.0 - math.log(h_hi), 1.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > 700:
            return math.inf
    while f(lo) < 0:
        lo -= 40.0
    x = math.exp(brentq(f, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=500))
    w = c_lo / math.log1p(h_lo * x)
    return x * w


def classify_pair(h_i: float, c_i: float, h_j: float, c_j: float, power_cap: float) -> PairRelation:
    """Compare the minimum-bandwidth curves of users ``i`` and ``j``.

    With ``h_j >= h_i`` the curves cross exactly once iff
    ``1 < c_j/c_i < h_j/h_i``; otherwise the user with the smaller curve
    everywhere dominates.  Inputs in the other order are swapped internally.
    """
    for name, v in (("h_i", h_i), ("c_i", c_i), ("h_j", h_j), ("c_j", c_j), ("power_cap", power_cap)):
        if not (math.isfinite(v) and v > 0):
            raise InvalidInputError(f"{name} must be positive and finite (got {v!r})")
    swapped = h_j < h_i
    if swapped:
        h_i, c_i, h_j, c_j = h_j, c_j, h_i, c_i
    g, r = h_j / h_i, c_j / c_i
    if g == 1.0 and r == 1.0:
        return PairRelation("identical")
    if r <= 1.0:
        kind = "j-dominates"
    elif r >= g:
        kind = "i-dominates"
    else:
        p = _crossing_power(h_i, c_i, h_j, c_j)
        return PairRelation("intersect", p, bool(0 < p < power_cap))
    if swapped:
        kind = "i-dominates" if kind == "j-dominates" else "j-dominates"
    return PairRelation(kind)


@dataclass
class OptimalityReport:
    """Checks of the conditions under which greedy removal is optimal.

    ``c1`` is ``None`` when some transmitter has more users than the
    exhaustive cap.  ``guaranteed`` is ``c1 and c2``.
    """

    equal_thresholds: bool
    crossing_counts: dict
    few_crossings: bool
    c1: Optional[bool]
    c2: bool
    per_source: dict

    @property
    def guaranteed(self) -> Optional[bool]:
        if self.c1 is None:
            return None
        return self.c1 and self.c2


def _source_sequence(oracle: PhaseOracle, k: int, members: list[int], ids):
    """Greedy removal restricted to one transmitter, down to the empty set."""
    current = frozenset(members)
    sets = [current]
    keys = [_SetState.key_of({k: oracle.solve(k, current)[:2]})]
    while current:
        best = best_key = None
        for i in sorted(current, key=lambda j: -ids[j]):
            cand = _SetState.key_of({k: oracle.solve(k, current - {i})[:2]})
            if best is None or _less(cand, best_key):
                best, best_key = i, cand
        current = current - {best}
        sets.append(current)
        keys.append(best_key)
    return sets, keys


def _best_of_size(oracle, k, members, size, ids):
    order = sorted(members, key=lambda j: ids[j])
    best = best_key = None
    for combo in combinations(order, size):
        key = _SetState.key_of({k: oracle.solve(k, frozenset(combo))[:2]})
        if best is None or _less(key, best_key):
            best, best_key = frozenset(combo), key
    return best, best_key


def check_optimality_conditions(topology: NetworkTopology, gains: ChannelGains, thresholds=None,
                                phase: Optional[str] = None, cap: int = EXHAUSTIVE_CAP) -> OptimalityReport:
    """Evaluate the greedy optimality conditions on one hop.

    Reports whether all thresholds are equal, how many other users' curves
    each user crosses below its transmitter's budget (at most one each is
    sufficient), the per-transmitter "remaining set is best" condition C1
    checked against exhaustive search, and the "diminishing removal gains"
    condition C2 read off the greedy sequence.
    """
    ensure_valid(topology, gains)
    if phase is None:
        phase = PHASE_SOURCE if topology.relay_mode else PHASE_DIRECT
    c = _thresholds(topology, thresholds)
    view = phase_view(topology, gains, phase)
    oracle = PhaseOracle(view, c)
    h = view.normalized_gains
    ids = topology.user_ids
    counts = {}
    c1: Optional[bool] = True
    c2 = True
    per_source = {}
    for k in range(len(view.budgets)):
        members = [int(i) for i in view.members(k)]
        if not members:
            continue
        budget = float(view.budgets[k])
        for i in members:
            counts[ids[i]] = sum(
                1 for j in members if j != i
                and (rel := classify_pair(h[i], c[i], h[j], c[j], budget)).kind == "intersect" and rel.inside)
        sets, keys = _source_sequence(oracle, k, members, ids)
        demands = [_SetState.demand_of(key) for key in keys]
        gains_seq = [a - b for a, b in zip(demands, demands[1:])]
        src_c2 = all(g0 > g1 for g0, g1 in zip(gains_seq, gains_seq[1:])
                     if math.isfinite(g0) and math.isfinite(g1))
        src_c1: Optional[bool] = None
        mismatches = []
        if len(members) <= cap:
            src_c1 = True
            for t in range(1, len(members) + 1):
                best, best_key = _best_of_size(oracle, k, members, len(members) - t, ids)
                if _less(best_key, keys[t]):
                    src_c1 = False
                    mismatches.append((t, _ids_of(topology, sets[t]), _ids_of(topology, best)))
        per_source[k] = {
            "removal_order": [ids[next(iter(a - b))] for a, b in zip(sets, sets[1:])],
            "demands": demands,
            "c1": src_c1,
            "c2": src_c2,
            "c1_mismatches": mismatches,
        }
        c2 = c2 and src_c2
        if src_c1 is None:
            c1 = None
        elif c1 is not None:
            c1 = c1 and src_c1
    return OptimalityReport(
        equal_thresholds=bool(np.all(c == c[0])),
        crossing_counts=counts,
        few_crossings=all(v <= 1 for v in counts.values()),
        c1=c1,
        c2=c2,
        per_source=per_source,
    )

"""Joint bandwidth and power allocation for the three objectives.

Each objective has a direct-link and a decode-and-forward relay variant, and
two equal-bandwidth baselines are provided for comparison:

* EBOPA: every user gets ``W / N`` of each phase, powers chosen optimally;
* EBPA: bandwidth and power both split equally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .capacity import link_capacity_array
from .errors import InfeasibleInstanceError, InvalidInputError, SolverError
from .model import (
    PHASE_DIRECT,
    PHASE_RELAY,
    PHASE_SOURCE,
    Allocation,
    ChannelGains,
    NetworkTopology,
    PhaseView,
    ensure_valid,
    phase_view,
)
from .programs import (
    fixed_bandwidth_relay_program,
    max_min_program,
    max_min_relay_program,
    power_min_program,
    power_min_relay_program,
    relay_epigraph_program,
    sum_capacity_program,
)
from .solver_core import SolverConfig, solve

OBJECTIVES = ("sum", "maxmin", "powermin")
SCHEMES = ("obpa", "ebopa", "ebpa")

SPARSE_FRACTION = 1e-7
MAXMIN_RTOL = 1e-8


@dataclass(frozen=True)
class Solution:
    """An allocation with its objective value.

    ``value`` is the total capacity, the worst-user capacity or the total
    power depending on the objective.  ``capacities`` are end-to-end.
    """

    allocation: Allocation
    value: float
    capacities: np.ndarray
    info: dict = field(default_factory=dict)


def user_capacities(topology: NetworkTopology, gains: ChannelGains, alloc: Allocation) -> np.ndarray:
    n0 = topology.noise_psd
    if topology.relay_mode:
        c1 = link_capacity_array(alloc.p_s, alloc.w_s, gains.h_sr, n0)
        c2 = link_capacity_array(alloc.p_r, alloc.w_r, gains.h_rd, n0)
        return np.minimum(c1, c2)
    return link_capacity_array(alloc.p_s, alloc.w_s, gains.h_sd, n0)


def total_power(alloc: Allocation) -> float:
    total = float(alloc.p_s.sum())
    if alloc.relay_mode:
        total += float(alloc.p_r.sum())
    return total


def metric(objective: str, topology, gains, alloc) -> float:
    if objective == "sum":
        return float(user_capacities(topology, gains, alloc).sum())
    if objective == "maxmin":
        return float(user_capacities(topology, gains, alloc).min())
    if objective == "powermin":
        return total_power(alloc)
    raise InvalidInputError(f"unknown objective {objective!r}")


def _solution(topology, gains, alloc, value, **info) -> Solution:
    return Solution(alloc, float(value), user_capacities(topology, gains, alloc), info)


def _phases(topology, gains):
    if topology.relay_mode:
        return phase_view(topology, gains, PHASE_SOURCE), phase_view(topology, gains, PHASE_RELAY)
    return (phase_view(topology, gains, PHASE_DIRECT),)


def _sparsify(p, w, owner, budgets, W, drop):
    """Zero the users in ``drop`` and hand every leftover resource to the rest.

    Each transmitter's remaining users share its full budget in proportion
    to their powers and the served users share all of ``W``; capacities can
    only grow.
    """
    p, w = p.copy(), w.copy()
    p[drop] = 0.0
    w[drop] = 0.0
    for k in range(len(budgets)):
        members = (owner == k) & ~drop
        tot = p[members].sum()
        if tot > 0:
            p[members] *= budgets[k] / tot
    keep = ~drop
    if keep.any() and w[keep].sum() > 0:
        w[keep] *= W / w[keep].sum()
    return p, w


def _clip_to_budgets(p, owner, budgets):
    p = np.maximum(p, 0.0)
    for k, b in enumerate(budgets):
        m = owner == k
        s = p[m].sum()
        if s > b:
            p[m] *= b / s
    return p


# --------------------------------------------------------------------------
# sum capacity


def sum_capacity_no_relay(topology: NetworkTopology, gains: ChannelGains,
                          method: str = "closed-form", config: SolverConfig = SolverConfig()) -> Solution:
    """Maximise total capacity on direct links.

    The closed form gives each source's whole budget to its best user (lowest
    id on ties) and splits the spectrum among these winners in proportion to
    ``h * P``.  ``method="barrier"`` solves the same problem numerically.
    """
    ensure_valid(topology, gains, relay=False)
    view = phase_view(topology, gains, PHASE_DIRECT)
    n, W = topology.n_users, topology.total_bandwidth
    ids = np.array(topology.user_ids)
    if method == "barrier":
        prog, layout = sum_capacity_program(view.normalized_gains, view.owner, view.budgets, W)
        res = solve(prog, config)
        if not res.converged:
            raise SolverError(f"barrier solver stopped: {res.status.value}")
        (p, w), _ = layout.unpack(res.x)
        p = _clip_to_budgets(p, view.owner, view.budgets)
        w = np.maximum(w, 0.0)
        drop = (p <= SPARSE_FRACTION * view.budgets[view.owner]) | (w <= SPARSE_FRACTION * W)
        p, w = _sparsify(p, w, view.owner, view.budgets, W, drop)
        alloc = Allocation(p, w)
        return _solution(topology, gains, alloc, metric("sum", topology, gains, alloc),
                         method="barrier", gap=res.gap, newton_iterations=res.newton_iterations)
    if method != "closed-form":
        raise InvalidInputError(f"unknown method {method!r}")
    p = np.zeros(n)
    for k in range(len(view.budgets)):
        members = view.members(k)
        if members.size == 0:
            continue
        best = members[np.lexsort((ids[members], -view.gains[members]))[0]]
        p[best] = view.budgets[k]
    weight = view.gains * p
    w = W * weight / weight.sum()
    alloc = Allocation(p, w)
    return _solution(topology, gains, alloc, metric("sum", topology, gains, alloc), method="closed-form")


def dominated_users(topology: NetworkTopology, gains: ChannelGains) -> np.ndarray:
    """Boolean mask of users that the relay sum-capacity optimum leaves unserved.

    User ``j`` is dropped when another user with the same source and relay is
    at least as good on both hops and strictly better on one; exact ties on
    both hops drop the higher id.
    """
    src, rly = topology.source_index(), topology.relay_index()
    hsr, hrd = gains.h_sr, gains.h_rd
    ids = topology.user_ids
    n = topology.n_users
    out = np.zeros(n, dtype=bool)
    for j in range(n):
        for i in range(n):
            if i == j or src[i] != src[j] or rly[i] != rly[j]:
                continue
            weak = hsr[i] >= hsr[j] and hrd[i] >= hrd[j]
            strict = hsr[i] > hsr[j] or hrd[i] > hrd[j]
            if weak and (strict or ids[i] < ids[j]):
                out[j] = True
                break
    return out


def sum_capacity_relay(topology: NetworkTopology, gains: ChannelGains,
                       config: SolverConfig = SolverConfig()) -> Solution:
    """Maximise total end-to-end capacity with decode-and-forward relays.

    Dominated users are removed first; the rest is solved in epigraph form by
    the barrier method, after which users left with a negligible share are
    zeroed.
    """
    ensure_valid(topology, gains, relay=True)
    v1, v2 = _phases(topology, gains)
    n, W = topology.n_users, topology.total_bandwidth
    keep = ~dominated_users(topology, gains)
    idx = np.flatnonzero(keep)
    prog, layout = relay_epigraph_program(
        v1.normalized_gains[idx], v2.normalized_gains[idx],
        v1.owner[idx], v1.budgets, v2.owner[idx], v2.budgets, W)
    res = solve(prog, config)
    if not res.converged:
        raise SolverError(f"barrier solver stopped: {res.status.value}")
    (ps, ws, pr, wr), _ = layout.unpack(res.x)
    ps = _clip_to_budgets(ps, v1.owner[idx], v1.budgets)
    pr = _clip_to_budgets(pr, v2.owner[idx], v2.budgets)
    ws, wr = np.maximum(ws, 0.0), np.maximum(wr, 0.0)
    drop = ((ps <= SPARSE_FRACTION * v1.budgets[v1.owner[idx]])
            | (pr <= SPARSE_FRACTION * v2.budgets[v2.owner[idx]])
            | (ws <= SPARSE_FRACTION * W) | (wr <= SPARSE_FRACTION * W))
    ps, ws = _sparsify(ps, ws, v1.owner[idx], v1.budgets, W, drop)
    pr, wr = _sparsify(pr, wr, v2.owner[idx], v2.budgets, W, drop)
    full = [np.zeros(n) for _ in range(4)]
    for arr, part in zip(full, (ps, ws, pr, wr)):
        arr[idx] = part
    alloc = Allocation(*full)
    c1 = link_capacity_array(alloc.p_s, alloc.w_s, gains.h_sr, topology.noise_psd)
    c2 = link_capacity_array(alloc.p_r, alloc.w_r, gains.h_rd, topology.noise_psd)
    return _solution(topology, gains, alloc, float(np.minimum(c1, c2).sum()),
                     pruned=tuple(np.flatnonzero(~keep)), hop_gap=c1 - c2, gap=res.gap,
                     newton_iterations=res.newton_iterations)


# --------------------------------------------------------------------------
# worst-user capacity


def _demand_at(view: PhaseView, T: float):
    """Per-user (p, w) meeting threshold ``T`` with least total bandwidth; ``None`` if impossible."""
    n = len(view.owner)
    p, w = np.zeros(n), np.zeros(n)
    total = 0.0
    h = view.normalized_gains
    for k in range(len(view.budgets)):
        m = view.members(k)
        if m.size == 0:
            continue
        pk, wk, _, tk = kernels.solve_single_source(h[m], np.full(m.size, T), float(view.budgets[k]))
        if not math.isfinite(tk):
            return None, math.inf
        p[m], w[m] = pk, wk
        total += tk
    return (p, w), total


def _max_min_phase(view: PhaseView):
    """Largest common threshold ``T`` reachable by all users of one hop.

    Bisection on ``T`` with the bandwidth oracle as feasibility test, then
    any leftover bandwidth is handed out in proportion and powers trimmed so
    every user sits exactly at the common capacity.
    """
    W, h = view.total_bandwidth, view.normalized_gains
    full = view.budgets[view.owner]
    hi = float(np.min(W * np.log1p(h * full / W)))
    lo = 0.0
    best = None
    while hi - lo > MAXMIN_RTOL * hi:
        mid = 0.5 * (lo + hi)
        sol, tot = _demand_at(view, mid)
        if tot <= W:
            lo, best = mid, sol
        else:
            hi = mid
    if best is None:  # bracket collapsed before any feasible probe
        best, _ = _demand_at(view, lo if lo > 0 else hi * 1e-3)
    p, w = best
    w = w * (W / w.sum())
    caps = w * np.log1p(h * p / w)
    T = float(caps.min())
    p_trim = np.expm1(T / w) * w / h
    p = np.minimum(p, p_trim)
    caps = w * np.log1p(h * p / w)
    return p, w, float(caps.min()), lo


def max_min_no_relay(topology: NetworkTopology, gains: ChannelGains,
                     method: str = "bisection", config: SolverConfig = SolverConfig()) -> Solution:
    """Maximise the worst user's capacity on direct links.

    ``method="barrier"`` solves the epigraph program instead (cross-check).
    """
    ensure_valid(topology, gains, relay=False)
    view = phase_view(topology, gains, PHASE_DIRECT)
    if method == "barrier":
        prog, layout = max_min_program(view.normalized_gains, view.owner, view.budgets,
                                       topology.total_bandwidth)
        res = solve(prog, config)
        (p, w), T = layout.unpack(res.x)
        alloc = Allocation(_clip_to_budgets(p, view.owner, view.budgets), np.maximum(w, 0))
        return _solution(topology, gains, alloc, float(T[0]), method="barrier", gap=res.gap)
    if method != "bisection":
        raise InvalidInputError(f"unknown method {method!r}")
    p, w, T, lower = _max_min_phase(view)
    alloc = Allocation(p, w)
    return _solution(topology, gains, alloc, metric("maxmin", topology, gains, alloc),
                     method="bisection", bisection_lower=lower)


def max_min_relay(topology: NetworkTopology, gains: ChannelGains,
                  method: str = "bisection", config: SolverConfig = SolverConfig()) -> Solution:
    """Worst-user capacity with relaying: the weaker of the two per-hop optima.

    Given a common target the hops share no variables, so each is solved as
    a direct-link max-min problem.  ``info["binding_phase"]`` names the hop
    that limits the result.
    """
    ensure_valid(topology, gains, relay=True)
    v1, v2 = _phases(topology, gains)
    if method == "barrier":
        prog, layout = max_min_relay_program(
            v1.normalized_gains, v2.normalized_gains, v1.owner, v1.budgets,
            v2.owner, v2.budgets, topology.total_bandwidth)
        res = solve(prog, config)
        (ps, ws, pr, wr), T = layout.unpack(res.x)
        alloc = Allocation(_clip_to_budgets(ps, v1.owner, v1.budgets), np.maximum(ws, 0),
                           _clip_to_budgets(pr, v2.owner, v2.budgets), np.maximum(wr, 0))
        return _solution(topology, gains, alloc, float(T[0]), method="barrier", gap=res.gap)
    if method != "bisection":
        raise InvalidInputError(f"unknown method {method!r}")
    ps, ws, t1, _ = _max_min_phase(v1)
    pr, wr, t2, _ = _max_min_phase(v2)
    alloc = Allocation(ps, ws, pr, wr)
    binding = PHASE_SOURCE if t1 <= t2 else PHASE_RELAY
    return _solution(topology, gains, alloc, metric("maxmin", topology, gains, alloc),
                     method="bisection", phase_values=(t1, t2), binding_phase=binding)


# --------------------------------------------------------------------------
# power minimisation


def _bandwidth_certificate(view: PhaseView, c):
    h = view.normalized_gains
    total = 0.0
    parts = []
    for k in range(len(view.budgets)):
        m = view.members(k)
        if m.size == 0:
            continue
        pk, wk, _, tk = kernels.solve_single_source(h[m], c[m], float(view.budgets[k]))
        parts.append((m, pk, wk))
        total += tk
    return total, parts


def _strict_start(view: PhaseView, c):
    """A point with every capacity above threshold and every cap slack.

    Shrinks the budgets slightly, takes the least-bandwidth allocation for
    them and widens every channel into the remaining spectrum.  Returns
    ``None`` when the instance is feasible only on its boundary.
    """
    W = view.total_bandwidth
    n = len(view.owner)
    for delta in (1e-2, 1e-3, 1e-4, 1e-6, 1e-8, 1e-10):
        shrunk = view._replace(budgets=view.budgets * (1 - delta))
        total, parts = _bandwidth_certificate(shrunk, c)
        if total < W:
            p, w = np.zeros(n), np.zeros(n)
            for m, pk, wk in parts:
                p[m], w[m] = pk, wk
            w *= 0.5 * (W + total) / total
            return np.concatenate([p, w])
    return None


def _polish_power(p, w, h, c):
    """Lower each power to exactly what its bandwidth needs, never below threshold."""
    need = np.expm1(c / w) * w / h
    for _ in range(8):
        low = w * np.log1p(h * need / w) < c
        if not low.any():
            break
        need[low] = np.nextafter(need[low], np.inf) * (1 + 2e-16)
    return np.minimum(p, need)


def _power_min_phase(view: PhaseView, c, config: SolverConfig):
    W = view.total_bandwidth
    certificate, parts = _bandwidth_certificate(view, c)
    if not certificate <= W:
        raise InfeasibleInstanceError(
            f"thresholds need bandwidth {certificate:.6g} > {W:.6g} in phase {view.name!r}",
            certificate=certificate, phase=view.name)
    n = len(view.owner)
    h = view.normalized_gains
    x0 = _strict_start(view, c)
    if x0 is None:  # only the least-bandwidth point itself is feasible
        p, w = np.zeros(n), np.zeros(n)
        for m, pk, wk in parts:
            p[m], w[m] = pk, wk
        return p, w, certificate
    prog, layout = power_min_program(h, c, view.owner, view.budgets, W, x0)
    res = solve(prog, config)
    if not res.converged:
        raise SolverError(f"barrier solver stopped: {res.status.value}")
    (p, w), _ = layout.unpack(res.x)
    p = _polish_power(p, w, h, c)
    return p, w, certificate


def power_min_no_relay(topology: NetworkTopology, gains: ChannelGains, thresholds=None,
                       config: SolverConfig = SolverConfig()) -> Solution:
    """Least total power meeting every user's threshold on direct links.

    Raises :class:`InfeasibleInstanceError` carrying G(N) when the thresholds
    need more than the available bandwidth.
    """
    ensure_valid(topology, gains, relay=False)
    c = topology.thresholds() if thresholds is None else np.broadcast_to(
        np.asarray(thresholds, float), (topology.n_users,)).copy()
    view = phase_view(topology, gains, PHASE_DIRECT)
    p, w, cert = _power_min_phase(view, c, config)
    alloc = Allocation(p, w)
    return _solution(topology, gains, alloc, total_power(alloc), certificate=cert)


def power_min_relay(topology: NetworkTopology, gains: ChannelGains, thresholds=None,
                    method: str = "split", config: SolverConfig = SolverConfig()) -> Solution:
    """Least total source-plus-relay power meeting every threshold on both hops.

    The hops are independent, so the default solves them separately;
    ``method="joint"`` runs one barrier solve over both (cross-check).
    """
    ensure_valid(topology, gains, relay=True)
    c = topology.thresholds() if thresholds is None else np.broadcast_to(
        np.asarray(thresholds, float), (topology.n_users,)).copy()
    v1, v2 = _phases(topology, gains)
    if method == "joint":
        starts = []
        for v in (v1, v2):
            cert, _ = _bandwidth_certificate(v, c)
            if not cert <= v.total_bandwidth:
                raise InfeasibleInstanceError("phase infeasible", certificate=cert, phase=v.name)
            x = _strict_start(v, c)
            if x is None:
                raise SolverError("no strictly feasible start for the joint program")
            starts.append(x)
        prog, layout = power_min_relay_program(
            v1.normalized_gains, v2.normalized_gains, c, v1.owner, v1.budgets,
            v2.owner, v2.budgets, topology.total_bandwidth, np.concatenate(starts))
        res = solve(prog, config)
        (ps, ws, pr, wr), _ = layout.unpack(res.x)
        alloc = Allocation(ps, ws, pr, wr)
        return _solution(topology, gains, alloc, total_power(alloc), method="joint", gap=res.gap)
    if method != "split":
        raise InvalidInputError(f"unknown method {method!r}")
    ps, ws, cert1 = _power_min_phase(v1, c, config)
    pr, wr, cert2 = _power_min_phase(v2, c, config)
    alloc = Allocation(ps, ws, pr, wr)
    return _solution(topology, gains, alloc, total_power(alloc), certificate=(cert1, cert2),
                     phase_power=(float(ps.sum()), float(pr.sum())))


# --------------------------------------------------------------------------
# baselines


def water_filling(k, budget: float, w0: float):
    """Optimal powers on parallel channels of equal bandwidth ``w0``.

    ``k`` are noise-normalised gains; channel ``i`` carries
    ``w0 ln(1 + k_i p_i / w0)``.  Returns ``(p, level)`` with
    ``p_i = max(level - w0 / k_i, 0)``.
    """
    k = np.asarray(k, dtype=float)
    floors = w0 / k
    order = np.argsort(floors, kind="stable")
    sorted_floors = floors[order]
    n = len(k)
    for active in range(n, 0, -1):
        level = (budget + sorted_floors[:active].sum()) / active
        if level > sorted_floors[active - 1]:
            break
    p = np.maximum(level - floors, 0.0)
    return p, level


def ebpa(topology: NetworkTopology, gains: ChannelGains) -> Allocation:
    """Equal bandwidth ``W/N`` per user per phase and equal power per transmitter."""
    ensure_valid(topology, gains)
    n = topology.n_users
    w = np.full(n, topology.total_bandwidth / n)
    out = []
    for view in _phases(topology, gains):
        counts = np.bincount(view.owner, minlength=len(view.budgets))
        out += [view.budgets[view.owner] / counts[view.owner], w]
    return Allocation(*out)


def ebopa(topology: NetworkTopology, gains: ChannelGains, objective: str,
          thresholds=None, config: SolverConfig = SolverConfig()) -> Solution:
    """Equal bandwidth ``W/N`` per user, powers optimised for ``objective``.

    * ``sum``: water-filling per transmitter; with relays the two hops are
      coupled through ``min`` and the power split is solved by the barrier
      method.
    * ``maxmin``: the common capacity each transmitter can afford is
      ``w0 ln(1 + P / (w0 sum 1/h))``; the network value is the minimum.
    * ``powermin``: each user gets exactly the power its threshold needs
      at ``W/N``; raises if a budget is exceeded.
    """
    ensure_valid(topology, gains)
    n, W = topology.n_users, topology.total_bandwidth
    w0 = W / n
    views = _phases(topology, gains)
    wfix = np.full(n, w0)
    if objective == "sum":
        if topology.relay_mode:
            v1, v2 = views
            prog = fixed_bandwidth_relay_program(
                v1.normalized_gains, v2.normalized_gains, v1.owner, v1.budgets,
                v2.owner, v2.budgets, w0)
            res = solve(prog, config)
            if not res.converged:
                raise SolverError(f"barrier solver stopped: {res.status.value}")
            no_drop = np.zeros(n, dtype=bool)
            ps, _ = _sparsify(np.maximum(res.x[:n], 0.0), wfix, v1.owner, v1.budgets, W, no_drop)
            pr, _ = _sparsify(np.maximum(res.x[n:2 * n], 0.0), wfix, v2.owner, v2.budgets, W, no_drop)
            alloc = Allocation(ps, wfix, pr, wfix)
        else:
            view = views[0]
            p = np.zeros(n)
            for k in range(len(view.budgets)):
                m = view.members(k)
                if m.size:
                    p[m], _ = water_filling(view.normalized_gains[m], float(view.budgets[k]), w0)
            alloc = Allocation(p, wfix)
        return _solution(topology, gains, alloc, metric("sum", topology, gains, alloc))
    if objective == "maxmin":
        T = math.inf
        for view in views:
            inv_h = np.bincount(view.owner, weights=1.0 / view.normalized_gains,
                                minlength=len(view.budgets))
            used = inv_h > 0
            T = min(T, float(np.min(w0 * np.log1p(view.budgets[used] / (w0 * inv_h[used])))))
        out = []
        for view in views:
            p = np.expm1(T / w0) * w0 / view.normalized_gains
            out += [_clip_to_budgets(p, view.owner, view.budgets), wfix]
        alloc = Allocation(*out)
        return _solution(topology, gains, alloc, metric("maxmin", topology, gains, alloc))
    if objective == "powermin":
        c = topology.thresholds() if thresholds is None else np.broadcast_to(
            np.asarray(thresholds, float), (n,)).copy()
        out = []
        for view in views:
            h = view.normalized_gains
            p = _polish_power(np.full(n, np.inf), wfix, h, c)
            used = np.bincount(view.owner, weights=p, minlength=len(view.budgets))
            over = used > view.budgets
            if over.any():
                k = int(np.flatnonzero(over)[0])
                raise InfeasibleInstanceError(
                    f"equal bandwidth needs power {used[k]:.6g} > {view.budgets[k]:.6g} "
                    f"at transmitter index {k} in phase {view.name!r}", phase=view.name)
            out += [p, wfix]
        alloc = Allocation(*out)
        return _solution(topology, gains, alloc, total_power(alloc))
    raise InvalidInputError(f"unknown objective {objective!r}")


def allocate(topology: NetworkTopology, gains: ChannelGains, objective: str,
             scheme: str = "obpa", thresholds=None) -> Solution:
    """Dispatch on scheme and objective; relay mode follows the topology."""
    if scheme == "ebpa":
        alloc = ebpa(topology, gains)
        return _solution(topology, gains, alloc, metric(objective, topology, gains, alloc))
    if scheme == "ebopa":
        return ebopa(topology, gains, objective, thresholds)
    if scheme != "obpa":
        raise InvalidInputError(f"unknown scheme {scheme!r}")
    relay = topology.relay_mode
    if objective == "sum":
        return sum_capacity_relay(topology, gains) if relay else sum_capacity_no_relay(topology, gains)
    if objective == "maxmin":
        return max_min_relay(topology, gains) if relay else max_min_no_relay(topology, gains)
    if objective == "powermin":
        if relay:
            return power_min_relay(topology, gains, thresholds)
        return power_min_no_relay(topology, gains, thresholds)
    raise InvalidInputError(f"unknown objective {objective!r}")

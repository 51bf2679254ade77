"""Domain types shared by every solver.

A network is a set of users, each a link from a source (and, in relay mode,
through one designated relay) to a destination.  Users are stored in a
fixed order; every per-user array in this package follows that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import DimensionError, InvalidInputError

PHASE_DIRECT = "direct"
PHASE_SOURCE = "source"
PHASE_RELAY = "relay"


@dataclass(frozen=True)
class Node:
    """A transmitter (source or relay) with its power budget."""

    id: int
    power_budget: float


@dataclass(frozen=True)
class User:
    id: int
    source_id: int
    relay_id: Optional[int] = None
    c_min: Optional[float] = None  # nats/s; None when the scenario carries no threshold


@dataclass(frozen=True)
class NetworkTopology:
    """Sources, relays, users and the shared spectrum.

    A topology is in relay mode iff it lists at least one relay; in that case
    every user must name its relay.
    """

    sources: tuple[Node, ...]
    relays: tuple[Node, ...]
    users: tuple[User, ...]
    total_bandwidth: float
    noise_psd: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "relays", tuple(self.relays))
        object.__setattr__(self, "users", tuple(self.users))

    @property
    def relay_mode(self) -> bool:
        return len(self.relays) > 0

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def user_ids(self) -> tuple[int, ...]:
        return tuple(u.id for u in self.users)

    def source_index(self) -> np.ndarray:
        pos = {s.id: k for k, s in enumerate(self.sources)}
        return np.array([pos[u.source_id] for u in self.users], dtype=np.intp)

    def relay_index(self) -> np.ndarray:
        pos = {r.id: k for k, r in enumerate(self.relays)}
        return np.array([pos[u.relay_id] for u in self.users], dtype=np.intp)

    def source_budgets(self) -> np.ndarray:
        return np.array([s.power_budget for s in self.sources], dtype=float)

    def relay_budgets(self) -> np.ndarray:
        return np.array([r.power_budget for r in self.relays], dtype=float)

    def thresholds(self) -> np.ndarray:
        """Per-user ``c_min`` as an array; raises if any is missing."""
        missing = [u.id for u in self.users if u.c_min is None]
        if missing:
            raise InvalidInputError(f"users {missing} have no capacity threshold")
        return np.array([u.c_min for u in self.users], dtype=float)

    def with_thresholds(self, c) -> "NetworkTopology":
        c = np.broadcast_to(np.asarray(c, dtype=float), (self.n_users,))
        users = tuple(replace(u, c_min=float(ci)) for u, ci in zip(self.users, c))
        return replace(self, users=users)

    def with_budgets(self, source=None, relay=None) -> "NetworkTopology":
        """Copy with every source and/or relay budget set to the given value."""
        sources = self.sources
        relays = self.relays
        if source is not None:
            sources = tuple(replace(s, power_budget=float(source)) for s in sources)
        if relay is not None:
            relays = tuple(replace(r, power_budget=float(relay)) for r in relays)
        return replace(self, sources=sources, relays=relays)

    def with_bandwidth(self, total_bandwidth) -> "NetworkTopology":
        return replace(self, total_bandwidth=float(total_bandwidth))


@dataclass(frozen=True)
class ChannelGains:
    """Per-user power gains: ``h_sd`` without relaying, ``h_sr``/``h_rd`` with."""

    h_sd: Optional[np.ndarray] = None
    h_sr: Optional[np.ndarray] = None
    h_rd: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("h_sd", "h_sr", "h_rd"):
            val = getattr(self, name)
            if val is not None:
                arr = np.array(val, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @classmethod
    def direct(cls, h_sd) -> "ChannelGains":
        return cls(h_sd=h_sd)

    @classmethod
    def relayed(cls, h_sr, h_rd) -> "ChannelGains":
        return cls(h_sr=h_sr, h_rd=h_rd)

    @property
    def relay_mode(self) -> bool:
        return self.h_sr is not None

    def normalized(self, n0: float, which: str = "h_sd") -> np.ndarray:
        """Gain divided by the noise PSD, the quantity the bandwidth oracle uses."""
        return getattr(self, which) / n0


@dataclass(frozen=True)
class Allocation:
    """Per-user powers and bandwidths.

    ``p_r``/``w_r`` are ``None`` for networks without relaying.  A user with
    zero bandwidth in a phase must also have zero power in that phase.
    """

    p_s: np.ndarray
    w_s: np.ndarray
    p_r: Optional[np.ndarray] = None
    w_r: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.p_r is None) != (self.w_r is None):
            raise InvalidInputError("p_r and w_r must be given together")
        for pn, wn in (("p_s", "w_s"), ("p_r", "w_r")):
            p, w = getattr(self, pn), getattr(self, wn)
            if p is None:
                continue
            p = np.array(p, dtype=float)
            w = np.array(w, dtype=float)
            if p.shape != w.shape or p.ndim != 1:
                raise DimensionError(f"{pn} and {wn} must be 1-D arrays of equal length")
            if np.any(~np.isfinite(p)) or np.any(~np.isfinite(w)):
                raise InvalidInputError(f"{pn}/{wn} must be finite")
            if np.any(p < 0) or np.any(w < 0):
                raise InvalidInputError(f"{pn}/{wn} must be nonnegative")
            if np.any((w == 0) & (p > 0)):
                raise InvalidInputError(f"positive {pn} on zero {wn}")
            p.setflags(write=False)
            w.setflags(write=False)
            object.__setattr__(self, pn, p)
            object.__setattr__(self, wn, w)

    @property
    def relay_mode(self) -> bool:
        return self.p_r is not None

    @property
    def n_users(self) -> int:
        return len(self.p_s)

    @classmethod
    def zeros(cls, n: int, relay: bool = False) -> "Allocation":
        z = np.zeros(n)
        if relay:
            return cls(z, z, z, z)
        return cls(z, z)


class PhaseView(NamedTuple):
    """One transmission phase reduced to the single-hop problem.

    ``owner[i]`` is the index of the transmitter serving user ``i`` in this
    phase, ``budgets`` the transmitters' power budgets and ``gains`` the raw
    per-user gains of the hop.
    """

    name: str
    owner: np.ndarray
    budgets: np.ndarray
    gains: np.ndarray
    total_bandwidth: float
    noise_psd: float

    @property
    def normalized_gains(self) -> np.ndarray:
        return self.gains / self.noise_psd

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.owner == k)


def phase_view(topology: NetworkTopology, gains: ChannelGains, phase: str) -> PhaseView:
    if phase == PHASE_DIRECT:
        owner, budgets, h = topology.source_index(), topology.source_budgets(), gains.h_sd
    elif phase == PHASE_SOURCE:
        owner, budgets, h = topology.source_index(), topology.source_budgets(), gains.h_sr
    elif phase == PHASE_RELAY:
        owner, budgets, h = topology.relay_index(), topology.relay_budgets(), gains.h_rd
    else:
        raise InvalidInputError(f"unknown phase {phase!r}")
    if h is None:
        raise InvalidInputError(f"gains carry no values for phase {phase!r}")
    return PhaseView(phase, owner, budgets, np.asarray(h, dtype=float),
                     float(topology.total_bandwidth), float(topology.noise_psd))


def phases_of(topology: NetworkTopology) -> tuple[str, ...]:
    return (PHASE_SOURCE, PHASE_RELAY) if topology.relay_mode else (PHASE_DIRECT,)


# --------------------------------------------------------------------------
# validation


def validate_topology(topology: NetworkTopology, gains: Optional[ChannelGains] = None) -> list[str]:
    """List every violated invariant; an empty list means well-formed."""
    problems = []

    def positive(value, what):
        if not (isinstance(value, (int, float, np.floating, np.integer))
                and math.isfinite(value) and value > 0):
            problems.append(f"{what} must be positive and finite (got {value!r})")

    positive(topology.total_bandwidth, "total_bandwidth")
    positive(topology.noise_psd, "noise_psd")
    for kind, nodes in (("source", topology.sources), ("relay", topology.relays)):
        ids = [n.id for n in nodes]
        if len(set(ids)) != len(ids):
            problems.append(f"duplicate {kind} ids")
        for n in nodes:
            positive(n.power_budget, f"{kind} {n.id} power_budget")
    uids = [u.id for u in topology.users]
    if len(set(uids)) != len(uids):
        problems.append("duplicate user ids")
    if not topology.users:
        problems.append("topology has no users")
    source_ids = {s.id for s in topology.sources}
    relay_ids = {r.id for r in topology.relays}
    for u in topology.users:
        if u.source_id not in source_ids:
            problems.append(f"user {u.id} references unknown source {u.source_id}")
        if topology.relay_mode:
            if u.relay_id is None:
                problems.append(f"user {u.id} has no relay in a relay-mode topology")
            elif u.relay_id not in relay_ids:
                problems.append(f"user {u.id} references unknown relay {u.relay_id}")
        elif u.relay_id is not None:
            problems.append(f"user {u.id} names relay {u.relay_id} but the topology has no relays")
        if u.c_min is not None:
            positive(u.c_min, f"user {u.id} c_min")

    if gains is not None:
        n = topology.n_users
        needed = ("h_sr", "h_rd") if topology.relay_mode else ("h_sd",)
        for name in needed:
            arr = getattr(gains, name)
            if arr is None:
                problems.append(f"gains missing {name}")
            elif arr.shape != (n,):
                problems.append(f"gains {name} has shape {arr.shape}, expected ({n},)")
            elif not np.all(np.isfinite(arr) & (arr > 0)):
                problems.append(f"gains {name} must be strictly positive and finite")
    return problems


def ensure_valid(topology: NetworkTopology, gains: Optional[ChannelGains] = None,
                 relay: Optional[bool] = None) -> None:
    problems = validate_topology(topology, gains)
    if relay is not None and topology.relay_mode != relay:
        problems.append("relay-mode topology required" if relay else "topology without relays required")
    if problems:
        raise InvalidInputError("; ".join(problems))


@dataclass(frozen=True)
class ConstraintSlack:
    name: str
    limit: float
    used: float

    @property
    def slack(self) -> float:
        return self.limit - self.used


@dataclass(frozen=True)
class FeasibilityReport:
    constraints: tuple[ConstraintSlack, ...]
    rtol: float = 1e-8

    @property
    def violations(self) -> list[ConstraintSlack]:
        return [c for c in self.constraints if c.slack < -self.rtol * c.limit]

    @property
    def satisfied(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.satisfied


def check_feasibility(topology: NetworkTopology, allocation: Allocation,
                      rtol: float = 1e-8) -> FeasibilityReport:
    """Slack of every power cap and per-phase bandwidth cap.

    A constraint counts as satisfied when its slack is at least
    ``-rtol * limit``.
    """
    n = topology.n_users
    if allocation.n_users != n:
        raise DimensionError(f"allocation has {allocation.n_users} users, topology {n}")
    if allocation.relay_mode != topology.relay_mode:
        raise DimensionError("allocation and topology disagree on relay mode")
    W = float(topology.total_bandwidth)
    rows = []
    sidx = topology.source_index()
    for k, s in enumerate(topology.sources):
        rows.append(ConstraintSlack(f"power[source {s.id}]", s.power_budget,
                                    float(allocation.p_s[sidx == k].sum())))
    rows.append(ConstraintSlack("bandwidth[phase 1]", W, float(allocation.w_s.sum())))
    if topology.relay_mode:
        ridx = topology.relay_index()
        for k, r in enumerate(topology.relays):
            rows.append(ConstraintSlack(f"power[relay {r.id}]", r.power_budget,
                                        float(allocation.p_r[ridx == k].sum())))
        rows.append(ConstraintSlack("bandwidth[phase 2]", W, float(allocation.w_r.sum())))
    return FeasibilityReport(tuple(rows), rtol)


def simple_topology(budgets: Sequence[float], owners: Sequence[int], total_bandwidth: float,
                    thresholds: Optional[Sequence[float]] = None,
                    relay_budgets: Optional[Sequence[float]] = None,
                    relay_owners: Optional[Sequence[int]] = None,
                    noise_psd: float = 1.0) -> NetworkTopology:
    """Build a topology from 0-based owner indices; user/node ids start at 1."""
    sources = [Node(k + 1, float(b)) for k, b in enumerate(budgets)]
    relays = [Node(k + 1, float(b)) for k, b in enumerate(relay_budgets or ())]
    users = []
    for i, s in enumerate(owners):
        r = None if relay_owners is None else int(relay_owners[i]) + 1
        c = None if thresholds is None else float(thresholds[i])
        users.append(User(i + 1, int(s) + 1, r, c))
    return NetworkTopology(tuple(sources), tuple(relays), tuple(users),
                           float(total_bandwidth), float(noise_psd))

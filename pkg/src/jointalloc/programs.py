"""Barrier-solver formulations of the allocation problems.

Variables are laid out as ``[p_s, w_s]`` (no relay) or ``[p_s, w_s, p_r,
w_r]`` (relay), each block of length ``n``, optionally followed by epigraph
variables.  Every builder returns the program together with a strictly
feasible starting point already stored in ``x0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solver_core import ConvexProgram, Function


class CapacityRows:
    """Vectorised capacity constraints ``g_k(x) <= 0``.

    Row ``k`` is ``x[t_k] + const_k - C(x[p_k], x[w_k])`` with the capacity
    evaluated at the noise-normalised gain ``kgain_k``.  ``t_k = -1`` drops
    the epigraph term; ``w_k = -1`` pins the bandwidth to ``wfix_k``.
    """

    def __init__(self, n, p_idx, w_idx, kgain, t_idx=None, const=None, wfix=None):
        self.n = n
        self.p_idx = np.asarray(p_idx, dtype=np.intp)
        self.w_idx = np.asarray(w_idx, dtype=np.intp)
        self.k = np.asarray(kgain, dtype=float)
        m = len(self.p_idx)
        self.t_idx = np.full(m, -1, dtype=np.intp) if t_idx is None else np.asarray(t_idx, dtype=np.intp)
        self.const = np.zeros(m) if const is None else np.asarray(const, dtype=float)
        self.wfix = np.zeros(m) if wfix is None else np.asarray(wfix, dtype=float)
        self.rows = np.arange(m)
        self.has_t = self.t_idx >= 0
        self.var_w = self.w_idx >= 0

    def _pw(self, x):
        p = x[self.p_idx]
        w = np.where(self.var_w, x[np.maximum(self.w_idx, 0)], self.wfix)
        return p, w

    def value(self, x):
        p, w = self._pw(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            cap = np.where((p > 0) & (w > 0), w * np.log1p(self.k * p / w), np.nan)
        t = np.where(self.has_t, x[np.maximum(self.t_idx, 0)], 0.0)
        return t + self.const - cap

    def gradient(self, x):
        p, w = self._pw(x)
        s = w + self.k * p
        xr = self.k * p / w
        J = np.zeros((len(p), self.n))
        J[self.rows, self.p_idx] -= self.k * w / s
        vw = self.var_w
        J[self.rows[vw], self.w_idx[vw]] -= (np.log1p(xr) - xr / (1 + xr))[vw]
        ht = self.has_t
        J[self.rows[ht], self.t_idx[ht]] += 1.0
        return J

    def hessian(self, x):
        p, w = self._pw(x)
        s2 = (w + self.k * p) ** 2
        k2 = self.k * self.k
        H = np.zeros((len(p), self.n, self.n))
        r, ip, iw = self.rows, self.p_idx, self.w_idx
        H[r, ip, ip] = k2 * w / s2
        vw = self.var_w
        H[r[vw], ip[vw], iw[vw]] = -(k2 * p / s2)[vw]
        H[r[vw], iw[vw], ip[vw]] = -(k2 * p / s2)[vw]
        H[r[vw], iw[vw], iw[vw]] = (k2 * p * p / (w * s2))[vw]
        return H

    def as_function(self) -> Function:
        return Function(self.value, self.gradient, self.hessian)


def _sum_rows(owner, offset, n_vars, n_owner):
    G = np.zeros((n_owner, n_vars))
    for i, k in enumerate(owner):
        G[k, offset + i] = 1.0
    return G


@dataclass
class Layout:
    n: int
    relay: bool
    n_extra: int = 0

    @property
    def n_vars(self):
        return (4 if self.relay else 2) * self.n + self.n_extra

    def block(self, j):
        return slice(j * self.n, (j + 1) * self.n)

    @property
    def extra(self):
        return slice((4 if self.relay else 2) * self.n, self.n_vars)

    def unpack(self, x):
        n = self.n
        out = [x[0:n], x[n:2 * n]]
        if self.relay:
            out += [x[2 * n:3 * n], x[3 * n:4 * n]]
        return out, x[self.extra]


def _resource_constraints(layout, owners, budgets, W):
    """Nonnegativity, per-transmitter power caps and per-phase bandwidth caps."""
    n, nv = layout.n, layout.n_vars
    nblocks = 4 if layout.relay else 2
    rows, rhs = [], []
    neg = -np.eye(nv)[: nblocks * n]
    rows.append(neg)
    rhs.append(np.zeros(nblocks * n))
    for phase in range(nblocks // 2):
        owner, budget = owners[phase], budgets[phase]
        rows.append(_sum_rows(owner, 2 * phase * n, nv, len(budget)))
        rhs.append(np.asarray(budget, dtype=float))
        bw = np.zeros((1, nv))
        bw[0, (2 * phase + 1) * n:(2 * phase + 2) * n] = 1.0
        rows.append(bw)
        rhs.append(np.array([W]))
    return np.vstack(rows), np.concatenate(rhs)


def _interior_start(layout, owners, budgets, W, fraction=0.5):
    x = np.zeros(layout.n_vars)
    n = layout.n
    for phase in range(2 if layout.relay else 1):
        owner, budget = np.asarray(owners[phase]), np.asarray(budgets[phase], dtype=float)
        counts = np.bincount(owner, minlength=len(budget))
        x[2 * phase * n:(2 * phase + 1) * n] = fraction * budget[owner] / counts[owner]
        x[(2 * phase + 1) * n:(2 * phase + 2) * n] = fraction * W / n
    return x


def _linear_objective(c):
    c = np.asarray(c, dtype=float)
    nv = len(c)
    return Function(lambda x: float(c @ x), lambda x: c, lambda x: np.zeros((nv, nv)))


def sum_capacity_program(k, owner, budgets, W) -> tuple[ConvexProgram, Layout]:
    """Maximise total capacity without relaying (as minimisation of its negative)."""
    n = len(k)
    layout = Layout(n, relay=False)
    rows = CapacityRows(layout.n_vars, np.arange(n), np.arange(n, 2 * n), k)

    def value(x):
        return float(np.sum(rows.value(x)))

    obj = Function(value, lambda x: rows.gradient(x).sum(axis=0), lambda x: rows.hessian(x).sum(axis=0))
    G, h = _resource_constraints(layout, [owner], [budgets], W)
    x0 = _interior_start(layout, [owner], [budgets], W)
    return ConvexProgram(layout.n_vars, obj, x0, linear_ineq=(G, h)), layout


def relay_epigraph_program(k_sr, k_rd, src_owner, src_budgets, rly_owner, rly_budgets, W
                           ) -> tuple[ConvexProgram, Layout]:
    """Sum capacity with decode-and-forward relaying in epigraph form.

    Variables ``T_i`` are bounded by both hop capacities of user ``i``.
    """
    n = len(k_sr)
    layout = Layout(n, relay=True, n_extra=n)
    nv = layout.n_vars
    t_idx = np.arange(4 * n, 5 * n)
    rows = CapacityRows(
        nv,
        p_idx=np.concatenate([np.arange(n), np.arange(2 * n, 3 * n)]),
        w_idx=np.concatenate([np.arange(n, 2 * n), np.arange(3 * n, 4 * n)]),
        kgain=np.concatenate([k_sr, k_rd]),
        t_idx=np.concatenate([t_idx, t_idx]),
    )
    cvec = np.zeros(nv)
    cvec[t_idx] = -1.0
    owners, budgets = [src_owner, rly_owner], [src_budgets, rly_budgets]
    G, h = _resource_constraints(layout, owners, budgets, W)
    x0 = _interior_start(layout, owners, budgets, W)
    caps = -rows.value(np.concatenate([x0[:4 * n], np.zeros(n)]))
    x0[t_idx] = 0.5 * np.minimum(caps[:n], caps[n:])
    prog = ConvexProgram(nv, _linear_objective(cvec), x0, inequalities=rows.as_function(),
                         linear_ineq=(G, h))
    return prog, layout


def fixed_bandwidth_relay_program(k_sr, k_rd, src_owner, src_budgets, rly_owner, rly_budgets,
                                  w0: float) -> ConvexProgram:
    """Relay sum capacity with every bandwidth pinned to ``w0``.

    Variables are ``[p_s, p_r, T]``.
    """
    n = len(k_sr)
    nv = 3 * n
    t_idx = np.arange(2 * n, 3 * n)
    rows = CapacityRows(
        nv,
        p_idx=np.arange(2 * n),
        w_idx=np.full(2 * n, -1),
        kgain=np.concatenate([k_sr, k_rd]),
        t_idx=np.concatenate([t_idx, t_idx]),
        wfix=np.full(2 * n, float(w0)),
    )
    cvec = np.zeros(nv)
    cvec[t_idx] = -1.0
    G = np.vstack([
        -np.eye(nv)[:2 * n],
        _sum_rows(src_owner, 0, nv, len(src_budgets)),
        _sum_rows(rly_owner, n, nv, len(rly_budgets)),
    ])
    h = np.concatenate([np.zeros(2 * n), np.asarray(src_budgets, float), np.asarray(rly_budgets, float)])
    x0 = np.zeros(nv)
    for off, owner, budget in ((0, src_owner, src_budgets), (n, rly_owner, rly_budgets)):
        owner, budget = np.asarray(owner), np.asarray(budget, dtype=float)
        counts = np.bincount(owner, minlength=len(budget))
        x0[off:off + n] = 0.5 * budget[owner] / counts[owner]
    caps = -rows.value(np.concatenate([x0[:2 * n], np.zeros(n)]))
    x0[t_idx] = 0.5 * np.minimum(caps[:n], caps[n:])
    return ConvexProgram(nv, _linear_objective(cvec), x0, inequalities=rows.as_function(),
                         linear_ineq=(G, h))


def max_min_program(k, owner, budgets, W) -> tuple[ConvexProgram, Layout]:
    """Worst-user capacity without relaying, epigraph variable ``T`` last."""
    n = len(k)
    layout = Layout(n, relay=False, n_extra=1)
    nv = layout.n_vars
    rows = CapacityRows(nv, np.arange(n), np.arange(n, 2 * n), k, t_idx=np.full(n, 2 * n))
    cvec = np.zeros(nv)
    cvec[2 * n] = -1.0
    G, h = _resource_constraints(layout, [owner], [budgets], W)
    x0 = _interior_start(layout, [owner], [budgets], W)
    caps = -rows.value(np.concatenate([x0[:2 * n], [0.0]]))
    x0[2 * n] = 0.5 * caps.min()
    return ConvexProgram(nv, _linear_objective(cvec), x0, inequalities=rows.as_function(),
                         linear_ineq=(G, h)), layout


def max_min_relay_program(k_sr, k_rd, src_owner, src_budgets, rly_owner, rly_budgets, W):
    """Worst-user capacity with relaying: one ``T`` bounding both hops of every user."""
    n = len(k_sr)
    layout = Layout(n, relay=True, n_extra=1)
    nv = layout.n_vars
    rows = CapacityRows(
        nv,
        p_idx=np.concatenate([np.arange(n), np.arange(2 * n, 3 * n)]),
        w_idx=np.concatenate([np.arange(n, 2 * n), np.arange(3 * n, 4 * n)]),
        kgain=np.concatenate([k_sr, k_rd]),
        t_idx=np.full(2 * n, 4 * n),
    )
    cvec = np.zeros(nv)
    cvec[4 * n] = -1.0
    owners, budgets = [src_owner, rly_owner], [src_budgets, rly_budgets]
    G, h = _resource_constraints(layout, owners, budgets, W)
    x0 = _interior_start(layout, owners, budgets, W)
    caps = -rows.value(np.concatenate([x0[:4 * n], [0.0]]))
    x0[4 * n] = 0.5 * caps.min()
    return ConvexProgram(nv, _linear_objective(cvec), x0, inequalities=rows.as_function(),
                         linear_ineq=(G, h)), layout


def power_min_program(k, c, owner, budgets, W, x0) -> tuple[ConvexProgram, Layout]:
    """Total transmit power subject to per-user capacity thresholds (one hop)."""
    n = len(k)
    layout = Layout(n, relay=False)
    nv = layout.n_vars
    rows = CapacityRows(nv, np.arange(n), np.arange(n, 2 * n), k, const=c)
    cvec = np.zeros(nv)
    cvec[:n] = 1.0
    G, h = _resource_constraints(layout, [owner], [budgets], W)
    return ConvexProgram(nv, _linear_objective(cvec), x0, inequalities=rows.as_function(),
                         linear_ineq=(G, h)), layout


def power_min_relay_program(k_sr, k_rd, c, src_owner, src_budgets, rly_owner, rly_budgets, W, x0):
    """Joint two-hop power minimisation (used to cross-check the per-phase split)."""
    n = len(k_sr)
    layout = Layout(n, relay=True)
    nv = layout.n_vars
    rows = CapacityRows(
        nv,
        p_idx=np.concatenate([np.arange(n), np.arange(2 * n, 3 * n)]),
        w_idx=np.concatenate([np.arange(n, 2 * n), np.arange(3 * n, 4 * n)]),
        kgain=np.concatenate([k_sr, k_rd]),
        const=np.concatenate([c, c]),
    )
    cvec = np.zeros(nv)
    cvec[:n] = 1.0
    cvec[2 * n:3 * n] = 1.0
    owners, budgets = [src_owner, rly_owner], [src_budgets, rly_budgets]
    G, h = _resource_constraints(layout, owners, budgets, W)
    return ConvexProgram(nv, _linear_objective(cvec), x0, inequalities=rows.as_function(),
                         linear_ineq=(G, h)), layout

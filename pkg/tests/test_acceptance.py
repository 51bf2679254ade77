"""Acceptance criteria 1-10.

Each test prints one ``criterion N: PASS|FAIL`` line with the measured
figures, then asserts.  Criteria share one 500-run batch on the default
layout (criteria 6 and 7).
"""

import math
import time

import numpy as np
import pytest

import oracles
from conftest import random_direct, random_relay
from jointalloc.admission import (
    check_optimality_conditions,
    exhaustive_admission_no_relay,
    exhaustive_admission_relay,
    exhaustive_call_bound,
    greedy_admission_no_relay,
    greedy_admission_relay,
    greedy_call_bound,
    relay_call_bound,
)
from jointalloc.allocators import (
    allocate,
    max_min_no_relay,
    max_min_relay,
    power_min_no_relay,
    sum_capacity_no_relay,
    sum_capacity_relay,
)
from jointalloc.bandwidth_min import min_bandwidth_one_source
from jointalloc.capacity import min_bandwidth
from jointalloc.errors import InfeasibleInstanceError
from jointalloc.model import ChannelGains, check_feasibility, simple_topology
from jointalloc.programs import max_min_program, power_min_program, relay_epigraph_program, sum_capacity_program
from jointalloc.simharness import ScenarioConfig, generate_scenario, run_sweep, setup_config
from jointalloc.solver_core import gradient_check

BATCH_RUNS = 500
BATCH_SEED = 0


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def batch():
    """500 runs on the default relay layout for every objective."""
    cfg = ScenarioConfig(runs=BATCH_RUNS, seed=BATCH_SEED)
    t0 = time.perf_counter()
    out = {
        "sum": run_sweep(cfg, "c", [1.0], ("obpa", "ebopa", "ebpa"), "sum"),
        "maxmin": run_sweep(cfg, "c", [1.0], ("obpa", "ebopa", "ebpa"), "maxmin"),
        "powermin": run_sweep(cfg, "c", [1.0], ("obpa", "ebopa"), "powermin"),
    }
    out["seconds"] = time.perf_counter() - t0
    return out


def test_criterion_01_three_user_values(report):
    t0 = time.perf_counter()
    users = [(4.0, 1.0), (5.0, 1.1), (6.0, 1.2)]
    cases = {(0, 1): 1.3849, (0, 2): 1.3808, (1, 2): 1.3573, (0,): 0.4039, (1,): 0.4135, (2,): 0.4292}
    errs = {s: abs(min_bandwidth_one_source([users[i] for i in s], 1.1).total - v) for s, v in cases.items()}
    elapsed = time.perf_counter() - t0
    worst = max(errs.values())
    ok = worst <= 1e-3 and elapsed < 1.0
    assert report(1, ok, f"max |G - reference| = {worst:.2e} (tol 1e-3), {elapsed:.3f} s")


def test_criterion_02_three_user_greedy_trace(report):
    t0 = time.perf_counter()
    top = simple_topology([1.1], [0, 0, 0], 1.0, thresholds=[1.0, 1.1, 1.2])
    gains = ChannelGains.direct([4.0, 5.0, 6.0])
    g = greedy_admission_no_relay(top, gains)
    order = [s.user for s in g.removal_trace]
    after_one = tuple(sorted({1, 2, 3} - {order[0]}))
    e = exhaustive_admission_no_relay(top, gains)
    rep = check_optimality_conditions(top, gains)
    elapsed = time.perf_counter() - t0
    ok = (order == [1, 3] and after_one == (2, 3) and g.admitted == (2,) and e.admitted == (1,)
          and rep.c1 is False and elapsed < 1.0)
    assert report(2, ok, f"removals {order}, N(1) = {after_one}, N(2) = {g.admitted}, "
                         f"best 1-subset {e.admitted}, {elapsed:.3f} s")


def test_criterion_03_closed_form_vs_solver(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(100):
        top, gains = random_direct(rng)
        a = sum_capacity_no_relay(top, gains).value
        b = sum_capacity_no_relay(top, gains, method="barrier").value
        worst = max(worst, abs(a - b) / a)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-5 and elapsed < 60
    assert report(3, ok, f"max relative gap {worst:.2e} on 100 instances (tol 1e-5), {elapsed:.1f} s")


def test_criterion_04_oracle_equivalence(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    g_err = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 4))
        h, c = rng.uniform(0.5, 6, n), rng.uniform(0.3, 1.5, n)
        P = float(np.sum(c / h) * rng.uniform(1.1, 4))
        g_err = max(g_err, abs(min_bandwidth_one_source(list(zip(h, c)), P).total - oracles.demand_grid(h, c, P)))
    pm_err, done = 0.0, 0
    while done < 20:
        owners = rng.integers(0, 2, 2)
        h, c, budgets = rng.uniform(0.3, 4, 2), rng.uniform(0.3, 1.5, 2), rng.uniform(2, 20, 2)
        W = float(rng.uniform(1, 6))
        try:
            ours = power_min_no_relay(simple_topology(budgets, owners, W, thresholds=c), ChannelGains.direct(h)).value
        except InfeasibleInstanceError:
            continue
        ref = oracles.power_min_grid(h, c, owners, budgets, W)
        pm_err = max(pm_err, abs(ours - ref) / ref)
        done += 1
    rs_err = 0.0
    for _ in range(20):
        h_sr, h_rd = rng.uniform(0.3, 4, 2), rng.uniform(0.3, 4, 2)
        P_s, P_r, W = rng.uniform(2, 30), rng.uniform(2, 30), rng.uniform(1, 10)
        top = simple_topology([P_s], [0, 0], W, relay_budgets=[P_r], relay_owners=[0, 0])
        ours = sum_capacity_relay(top, ChannelGains.relayed(h_sr, h_rd)).value
        ref = oracles.relay_sum_grid(h_sr, h_rd, P_s, P_r, W)
        rs_err = max(rs_err, abs(ours - ref) / ref)
    elapsed = time.perf_counter() - t0
    ok = g_err <= 1e-3 and pm_err <= 1e-3 and rs_err <= 1e-2 and elapsed < 300
    assert report(4, ok, f"G abs err {g_err:.1e} (tol 1e-3), power-min rel err {pm_err:.1e} (tol 1e-3), "
                         f"relay sum rel err {rs_err:.1e} (tol 1e-2), {elapsed:.1f} s")


def test_criterion_05_equal_capacities(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)
    direct = relay = 0.0
    for _ in range(100):
        top, gains = random_direct(rng)
        caps = max_min_no_relay(top, gains).capacities
        direct = max(direct, (caps.max() - caps.min()) / caps.max())
        top, gains = random_relay(rng)
        sol = max_min_relay(top, gains)
        caps = sol.capacities
        relay = max(relay, (caps.max() - caps.min()) / caps.max())
    elapsed = time.perf_counter() - t0
    ok = direct <= 1e-6 and relay <= 1e-6 and elapsed < 60
    assert report(5, ok, f"max spread direct {direct:.1e}, relay {relay:.1e} (tol 1e-6), {elapsed:.1f} s")


def test_criterion_06_dominance_chain(report, batch):
    slack = 1e-6
    bad = []
    for objective in ("sum", "maxmin"):
        for run, row in batch[objective].statuses[1.0]:
            o, e, b = (row[s] for s in ("obpa", "ebopa", "ebpa"))
            if not (o[0] == e[0] == b[0] == "ok"):
                bad.append((objective, run, "status"))
                continue
            if o[1] < e[1] * (1 - slack) or e[1] < b[1] * (1 - slack):
                bad.append((objective, run, o[1], e[1], b[1]))
    checked = 0
    for run, row in batch["powermin"].statuses[1.0]:
        o, e = row["obpa"], row["ebopa"]
        if e[0] == "ok":
            checked += 1
            if o[0] != "ok" or o[1] > e[1] * (1 + slack):
                bad.append(("powermin", run, o, e))
    ok = not bad
    assert report(6, ok, f"{len(bad)} violations over {BATCH_RUNS} runs x 2 capacity objectives "
                         f"and {checked} runs where equal bandwidth meets the thresholds")


def test_criterion_07_statistical_bands(report, batch):
    bands = {"sum": (0.20, 0.60), "maxmin": (0.05, 0.40), "powermin": (0.05, 0.40)}
    parts, ok = [], True
    for objective, (lo, hi) in bands.items():
        res = batch[objective]
        imp, per_run = res.improvement[(1.0, "ebopa")]
        n = next(r["n"] for r in res.rows if r["scheme"] == "obpa")
        within = lo <= imp <= hi
        ok = ok and within and not res.failures
        parts.append(f"{objective} {imp:.1%} in [{lo:.0%}, {hi:.0%}]: {'yes' if within else 'no'} "
                     f"(per-run mean {per_run:.1%}, n={n}, failures {len(res.failures)})")
    ok = ok and batch["seconds"] < 900
    assert report(7, ok, "; ".join(parts) + f"; batch {batch['seconds']:.0f} s")


def test_criterion_08_equal_threshold_optimality(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(808)
    equal_bad = unequal_bad = 0
    for _ in range(100):
        top, gains = random_direct(rng, n_users=int(rng.integers(1, 9)), W=float(rng.uniform(0.5, 8)))
        top = top.with_thresholds(float(rng.uniform(0.2, 2.0)))
        if greedy_admission_no_relay(top, gains).n_admitted != exhaustive_admission_no_relay(top, gains).n_admitted:
            equal_bad += 1
        top = top.with_thresholds(rng.uniform(0.2, 2.0, top.n_users))
        if greedy_admission_no_relay(top, gains).n_admitted > exhaustive_admission_no_relay(top, gains).n_admitted:
            unequal_bad += 1
    elapsed = time.perf_counter() - t0
    ok = equal_bad == 0 and unequal_bad == 0 and elapsed < 600
    assert report(8, ok, f"equal thresholds: {equal_bad}/100 count mismatches; "
                         f"random thresholds: {unequal_bad}/100 with greedy > exhaustive, {elapsed:.1f} s")


def test_criterion_09_call_accounting(report):
    t0 = time.perf_counter()
    c0_values = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
    over, checked = [], 0
    for setup in (1, 2):
        cfg = setup_config(setup)
        for c0 in c0_values:
            for run in range(20):
                top, gains = generate_scenario(cfg.replace(threshold_low=c0), run)
                g = greedy_admission_no_relay(top, gains)
                e = exhaustive_admission_no_relay(top, gains)
                checked += 1
                if g.oracle_calls > greedy_call_bound(top.n_users, g.t_star):
                    over.append((setup, c0, run, "greedy"))
                if e.oracle_calls > exhaustive_call_bound(top.n_users, e.n_admitted):
                    over.append((setup, c0, run, "exhaustive"))
    for setup in (3, 4):
        cfg = setup_config(setup)
        for c0 in c0_values:
            for run in range(20):
                top, gains = generate_scenario(cfg.replace(threshold_low=c0), run)
                g = greedy_admission_relay(top, gains)
                e = exhaustive_admission_relay(top, gains)
                checked += 1
                d = g.details
                if g.oracle_calls > relay_call_bound(top.n_users, d["t1"], d["t2"], e.n_admitted):
                    over.append((setup, c0, run, "relay"))
    elapsed = time.perf_counter() - t0
    ok = not over
    assert report(9, ok, f"{len(over)} bound violations over {checked} runs "
                         f"(setups 1-4, 20 runs x {len(c0_values)} c0 values), {elapsed:.1f} s")


def test_criterion_10_numerical_hygiene(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1010)
    # gradient checks on every program family at random interior points
    grad = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 5))
        k, k2 = rng.uniform(0.2, 5, n), rng.uniform(0.2, 5, n)
        owner = rng.integers(0, 2, n)
        budgets = np.array([10.0, 8.0])
        progs = [
            sum_capacity_program(k, owner, budgets, 6.0)[0],
            max_min_program(k, owner, budgets, 6.0)[0],
            relay_epigraph_program(k, k2, owner, budgets, owner[::-1].copy(), budgets, 6.0)[0],
        ]
        x0 = np.concatenate([rng.uniform(0.5, 2, n), rng.uniform(0.5, 2, n)])
        progs.append(power_min_program(k, rng.uniform(0.2, 1, n), owner, budgets, 6.0, x0)[0])
        for prog in progs:
            grad = max(grad, gradient_check(prog, prog.x0 * rng.uniform(0.7, 1.3, prog.n), step=1e-5))
    # a power cut costs more bandwidth at lower power; checked with both right-hand sides
    m = 10_000
    h, c = rng.uniform(0.2, 5, m), rng.uniform(0.1, 2, m)
    floor = c / h
    p2 = floor * rng.uniform(1.2, 10, m)
    p1 = p2 + floor * rng.uniform(0.01, 10, m)
    dp = (p2 - floor) * rng.uniform(0.01, 0.99, m)
    F = np.vectorize(min_bandwidth)
    f1, f1d, f2, f2d = F(p1, h, c), F(p1 - dp, h, c), F(p2, h, c), F(p2 - dp, h, c)
    cost = int(np.sum(~(f1d - f1 < f2d - f2)))
    cost_alt = int(np.sum(~(f1d - f1 < f2d - f1)))
    # each user's optimal power grows with the source budget
    monotone = 0
    for _ in range(m // 4):
        n = int(rng.integers(1, 5))
        hh, cc = rng.uniform(0.2, 5, n), rng.uniform(0.1, 2, n)
        P = float(np.sum(cc / hh) * rng.uniform(1.05, 5))
        lo = min_bandwidth_one_source(list(zip(hh, cc)), P).p
        hi = min_bandwidth_one_source(list(zip(hh, cc)), P * rng.uniform(1.001, 3)).p
        monotone += int(np.sum(hi < lo * (1 - 1e-12)))
    # every scheme and objective yields a feasible allocation
    infeasible = 0
    for trial in range(60):
        top, gains = (random_relay if trial % 2 else random_direct)(rng, W=10.0)
        top = top.with_thresholds(0.3)
        for objective in ("sum", "maxmin", "powermin"):
            for scheme in ("obpa", "ebopa", "ebpa"):
                try:
                    sol = allocate(top, gains, objective, scheme)
                except InfeasibleInstanceError:
                    continue
                infeasible += not check_feasibility(top, sol.allocation, rtol=1e-8)
    elapsed = time.perf_counter() - t0
    ok = grad <= 1e-5 and cost == 0 and cost_alt == 0 and monotone == 0 and infeasible == 0 and elapsed < 120
    assert report(10, ok, f"gradient err {grad:.1e} (tol 1e-5); convex-cost failures {cost} (alternate form "
                          f"{cost_alt}) of {m}; monotonicity failures {monotone} over {m // 4} budget pairs; "
                          f"{infeasible} infeasible allocations; {elapsed:.1f} s")

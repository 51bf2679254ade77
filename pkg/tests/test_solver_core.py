import numpy as np
import pytest

import oracles
from jointalloc.errors import NoStrictlyFeasibleStartError
from jointalloc.programs import relay_epigraph_program, sum_capacity_program
from jointalloc.solver_core import ConvexProgram, Function, SolverConfig, Status, gradient_check, solve


def quadratic(n=3, x0=None):
    obj = Function(lambda x: float(np.sum((x - 1) ** 2)), lambda x: 2 * (x - 1), lambda x: 2 * np.eye(len(x)))
    G, h = np.eye(n), np.full(n, 10.0)
    return ConvexProgram(n, obj, np.zeros(n) if x0 is None else x0, linear_ineq=(G, h))


def test_quadratic_interior_minimum():
    res = solve(quadratic())
    assert res.status is Status.CONVERGED
    np.testing.assert_allclose(res.x, 1.0, atol=1e-7)
    assert res.gap <= 1e-8


def test_requires_strict_start():
    with pytest.raises(NoStrictlyFeasibleStartError):
        solve(quadratic(x0=np.full(3, 10.0)))


def test_deterministic():
    a, b = solve(quadratic()), solve(quadratic())
    assert np.array_equal(a.x, b.x) and a.objective == b.objective


def test_single_user_sum_capacity():
    prog, layout = sum_capacity_program(np.array([2.0]), np.array([0]), np.array([5.0]), 3.0)
    res = solve(prog)
    expect = 3.0 * np.log1p(2.0 * 5.0 / 3.0)
    assert -res.objective == pytest.approx(expect, rel=1e-5)


def test_two_user_sum_capacity_matches_grid():
    rng = np.random.default_rng(5)
    for _ in range(5):
        k = rng.uniform(0.3, 5, 2)
        P, W = rng.uniform(1, 20), rng.uniform(1, 10)
        prog, _ = sum_capacity_program(k, np.array([0, 0]), np.array([P]), W)
        res = solve(prog)
        # grid over (p1, w1); the rest goes to user 2
        best = -np.inf
        lo, hi = np.zeros(2), np.array([P, W])
        for _ in range(8):
            p1, w1 = np.meshgrid(np.linspace(lo[0], hi[0], 201), np.linspace(lo[1], hi[1], 201), indexing="ij")
            vals = oracles.capacity(p1, w1, k[0]) + oracles.capacity(P - p1, W - w1, k[1])
            i, j = np.unravel_index(np.argmax(vals), vals.shape)
            best = max(best, vals[i, j])
            step = (hi - lo) / 200
            centre = np.array([p1[i, j], w1[i, j]])
            lo, hi = np.maximum(0, centre - 3 * step), np.minimum([P, W], centre + 3 * step)
        assert -res.objective == pytest.approx(best, rel=1e-3)


def test_objective_path_nonincreasing():
    prog, _ = sum_capacity_program(np.array([1.0, 3.0, 0.5]), np.array([0, 0, 1]), np.array([4.0, 6.0]), 5.0)
    res = solve(prog)
    path = np.array(res.objective_path)
    assert np.all(np.diff(path) <= 1e-9 * np.abs(path[:-1]).max())
    assert res.min_slack > 0


def test_gradient_check_quadratic():
    assert gradient_check(quadratic(), np.array([0.3, -2.0, 4.0])) <= 1e-9


def test_gradient_check_relay_epigraph():
    rng = np.random.default_rng(6)
    prog, layout = relay_epigraph_program(rng.uniform(0.5, 3, 3), rng.uniform(0.5, 3, 3), np.array([0, 0, 1]),
                                          np.array([10.0, 8.0]), np.array([0, 1, 1]), np.array([15.0, 5.0]), 6.0)
    point = prog.x0 * rng.uniform(0.5, 1.5, layout.n_vars)
    assert gradient_check(prog, point, step=1e-5) <= 1e-5


def test_gradient_check_capacity_constraint():
    prog, _ = sum_capacity_program(np.array([3.0]), np.array([0]), np.array([5.0]), 3.0)
    assert gradient_check(prog, np.array([2.0, 1.0])) <= 1e-6


def test_max_iterations_status():
    res = solve(quadratic(), SolverConfig(max_outer=2))
    assert res.status is Status.MAX_ITERATIONS and not res.converged

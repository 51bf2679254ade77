import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import BACKENDS
from jointalloc import kernels


def test_backend_flag_names_a_known_backend():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("p,h,c", [(1.1, 4.0, 1.0), (0.5, 6.0, 1.2), (20.0, 0.3, 1.0), (1e3, 2.0, 0.01)])
def test_min_bandwidth_matches_bisection(backend, p, h, c):
    ref = float(oracles.min_bandwidth(p, h, c))
    assert kernels.min_bandwidth(p, h, c) == pytest.approx(ref, rel=1e-10)


def test_min_bandwidth_infinite_at_or_below_floor(backend):
    assert math.isinf(kernels.min_bandwidth(0.25, 4.0, 1.0))
    assert math.isinf(kernels.min_bandwidth(0.2, 4.0, 1.0))
    assert math.isnan(kernels.rate_exponent(0.1, 4.0, 1.0))


def test_psi_inverse_roots(backend):
    for y in (1e-12, 1e-4, 0.3, 1.0, 7.0, 1e3, 1e12):
        u = kernels.psi_inverse(y)
        assert math.exp(u) * (u - 1) + 1 == pytest.approx(y, rel=1e-9)


@settings(max_examples=300, deadline=None)
@given(p=st.floats(1e-3, 1e3), h=st.floats(1e-2, 1e2), c=st.floats(1e-2, 10.0))
def test_backends_agree(p, h, c):
    if "cython" not in BACKENDS:
        return
    a = BACKENDS["python"].min_bandwidth(p, h, c)
    b = BACKENDS["cython"].min_bandwidth(p, h, c)
    if math.isinf(a):
        assert math.isinf(b)
    else:
        assert b == pytest.approx(a, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(w=st.floats(1e-2, 1e2), h=st.floats(1e-2, 1e2), c=st.floats(1e-2, 10.0))
def test_inverse_round_trip(w, h, c):
    for impl in BACKENDS.values():
        p = impl.inv_min_bandwidth(w, h, c)
        if not (math.isfinite(p) and h * p > c * (1 + 1e-9)):
            continue
        assert impl.min_bandwidth(p, h, c) == pytest.approx(w, rel=1e-7)


def test_single_source_backends_agree():
    if "cython" not in BACKENDS:
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        h, c = rng.uniform(0.1, 5, n), rng.uniform(0.1, 2, n)
        P = float(np.sum(c / h) * rng.uniform(0.8, 5))
        a = BACKENDS["python"].solve_single_source(h, c, P)
        b = BACKENDS["cython"].solve_single_source(h, c, P)
        if math.isinf(a[3]):
            assert math.isinf(b[3])
            continue
        assert b[3] == pytest.approx(a[3], rel=1e-10)
        np.testing.assert_allclose(b[0], a[0], rtol=1e-7, atol=1e-12)


def test_single_source_three_user_subsets(backend):
    h, c = np.array([4.0, 5.0, 6.0]), np.array([1.0, 1.1, 1.2])
    p, w, lam, total = kernels.solve_single_source(h[:2], c[:2], 1.1)
    assert total == pytest.approx(1.38490465, abs=1e-6)
    assert p.sum() == pytest.approx(1.1, rel=1e-9)
    assert math.isinf(kernels.solve_single_source(h, c, 0.5)[3])


def test_large_excess_converges(backend):
    # u = c / w = 224: the root sits far below the initial bracket
    w, h, c = 0.03125, 1.0, 7.0
    p = kernels.inv_min_bandwidth(w, h, c)
    assert kernels.rate_exponent(p, h, c) == pytest.approx(224.0, rel=1e-12)

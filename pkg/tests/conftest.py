import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from jointalloc import _kernels_py, kernels  # noqa: E402
from jointalloc.model import ChannelGains, simple_topology  # noqa: E402

try:
    from jointalloc import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _kernels_py}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

_KERNEL_NAMES = ("rate_exponent", "min_bandwidth", "inv_min_bandwidth", "psi_inverse", "solve_single_source")


@pytest.fixture(params=sorted(BACKENDS))
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    impl = BACKENDS[request.param]
    for name in _KERNEL_NAMES:
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    monkeypatch.setattr(kernels, "BACKEND", request.param)
    return request.param


@pytest.fixture
def three_user():
    """Three users on one source: h = (4, 5, 6), c = (1, 1.1, 1.2), P = 1.1."""
    top = simple_topology([1.1], [0, 0, 0], 1.37, thresholds=[1.0, 1.1, 1.2])
    return top, ChannelGains.direct([4.0, 5.0, 6.0])


def random_direct(rng, n_users=None, n_sources=None, W=None, thresholds=False):
    n_sources = n_sources or int(rng.integers(1, 4))
    n_users = n_users or int(rng.integers(1, 7))
    owners = rng.integers(0, n_sources, n_users)
    budgets = rng.uniform(1.0, 30.0, n_sources)
    W = W if W is not None else float(rng.uniform(1.0, 20.0))
    c = rng.uniform(0.2, 2.0, n_users) if thresholds else None
    top = simple_topology(budgets, owners, W, thresholds=c)
    return top, ChannelGains.direct(rng.uniform(0.1, 5.0, n_users))


def random_relay(rng, n_users=None, W=None, thresholds=False):
    n_users = n_users or int(rng.integers(1, 6))
    n_s = int(rng.integers(1, 3))
    n_r = int(rng.integers(1, 3))
    src = rng.integers(0, n_s, n_users)
    rly = rng.integers(0, n_r, n_users)
    W = W if W is not None else float(rng.uniform(1.0, 20.0))
    c = rng.uniform(0.2, 1.5, n_users) if thresholds else None
    top = simple_topology(rng.uniform(5.0, 30.0, n_s), src, W, thresholds=c,
                          relay_budgets=list(rng.uniform(5.0, 40.0, n_r)), relay_owners=rly)
    gains = ChannelGains.relayed(rng.uniform(0.1, 5.0, n_users), rng.uniform(0.1, 5.0, n_users))
    return top, gains

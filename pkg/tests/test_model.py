import numpy as np
import pytest

from jointalloc.errors import DimensionError, InvalidInputError
from jointalloc.model import (
    Allocation,
    ChannelGains,
    NetworkTopology,
    Node,
    User,
    check_feasibility,
    ensure_valid,
    phase_view,
    phases_of,
    simple_topology,
    validate_topology,
)


def section5_topology():
    return simple_topology([20.0] * 4, [0, 1, 2, 3], 10.0, thresholds=[1.0] * 4,
                           relay_budgets=[40.0, 40.0], relay_owners=[0, 0, 1, 1])


def test_section5_topology_is_valid():
    top = section5_topology()
    gains = ChannelGains.relayed(np.ones(4), np.ones(4))
    assert validate_topology(top, gains) == []
    assert top.relay_mode and phases_of(top) == ("source", "relay")


def test_zero_threshold_is_one_violation():
    top = section5_topology()
    users = list(top.users)
    users[0] = User(1, 1, 1, 0.0)
    problems = validate_topology(NetworkTopology(top.sources, top.relays, users, 10.0))
    assert len(problems) == 1 and "c_min" in problems[0]


def test_relay_user_without_relay_is_one_violation():
    top = section5_topology()
    users = list(top.users)
    users[2] = User(3, 3, None, 1.0)
    problems = validate_topology(NetworkTopology(top.sources, top.relays, users, 10.0))
    assert len(problems) == 1 and "no relay" in problems[0]


def test_other_violations_listed():
    top = NetworkTopology((Node(1, -1.0),), (), (User(1, 2), User(1, 1)), 0.0, 1.0)
    problems = validate_topology(top, ChannelGains.direct([1.0, np.inf]))
    text = " | ".join(problems)
    for needle in ("total_bandwidth", "power_budget", "unknown source", "duplicate user", "h_sd"):
        assert needle in text
    with pytest.raises(InvalidInputError):
        ensure_valid(top)


def test_zero_allocation_full_slack():
    top = section5_topology()
    rep = check_feasibility(top, Allocation.zeros(4, relay=True))
    assert rep.satisfied and all(c.slack == c.limit for c in rep.constraints)


def test_power_slack_zero_at_budget():
    top = simple_topology([20.0], [0], 10.0)
    rep = check_feasibility(top, Allocation([20.0], [10.0]))
    assert rep.satisfied
    assert rep.constraints[0].slack == 0.0


def test_bandwidth_violation_of_two():
    top = simple_topology([20.0], [0, 0], 10.0)
    rep = check_feasibility(top, Allocation([1.0, 1.0], [6.0, 6.0]))
    assert not rep
    (viol,) = rep.violations
    assert viol.slack == pytest.approx(-2.0)


def test_feasibility_tolerance_is_relative():
    top = simple_topology([20.0], [0], 10.0)
    assert check_feasibility(top, Allocation([20.0 * (1 + 5e-9)], [10.0]))
    assert not check_feasibility(top, Allocation([20.0 * (1 + 5e-8)], [10.0]))


def test_dimension_mismatch():
    top = simple_topology([20.0], [0, 0], 10.0)
    with pytest.raises(DimensionError):
        check_feasibility(top, Allocation([1.0], [1.0]))
    with pytest.raises(DimensionError):
        check_feasibility(top, Allocation.zeros(2, relay=True))


def test_allocation_invariants():
    with pytest.raises(InvalidInputError):
        Allocation([1.0], [0.0])
    with pytest.raises(InvalidInputError):
        Allocation([-1.0], [1.0])
    with pytest.raises(InvalidInputError):
        Allocation([1.0], [1.0], [1.0], None)
    a = Allocation([1.0], [1.0])
    with pytest.raises(ValueError):
        a.p_s[0] = 2.0


def test_thresholds_required():
    top = simple_topology([20.0], [0], 10.0)
    with pytest.raises(InvalidInputError):
        top.thresholds()
    assert top.with_thresholds(2.0).thresholds().tolist() == [2.0]


def test_phase_view_normalises_gain():
    top = simple_topology([5.0], [0, 0], 3.0, noise_psd=2.0)
    view = phase_view(top, ChannelGains.direct([4.0, 1.0]), "direct")
    assert view.normalized_gains.tolist() == [2.0, 0.5]
    assert view.members(0).tolist() == [0, 1]

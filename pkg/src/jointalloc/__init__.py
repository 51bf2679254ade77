"""Joint bandwidth and power allocation with admission control for
multi-source wireless networks, with and without decode-and-forward relays."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    InfeasibleInstanceError,
    InfeasiblePowerError,
    InstanceTooLargeError,
    InvalidInputError,
    JointAllocError,
    ScenarioFormatError,
    SolverError,
)
from .model import Allocation, ChannelGains, NetworkTopology, Node, User, check_feasibility, simple_topology  # noqa: E402
from .capacity import link_capacity, min_bandwidth, inv_min_bandwidth  # noqa: E402
from .bandwidth_min import min_total_bandwidth  # noqa: E402
from .allocators import allocate, ebopa, ebpa  # noqa: E402
from .admission import (  # noqa: E402
    check_optimality_conditions,
    classify_pair,
    exhaustive_admission_no_relay,
    exhaustive_admission_relay,
    greedy_admission_no_relay,
    greedy_admission_relay,
)

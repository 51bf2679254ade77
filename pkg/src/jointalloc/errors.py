"""Exception hierarchy."""


class JointAllocError(Exception):
    """Base class for all package errors."""


class InvalidInputError(JointAllocError, ValueError):
    """Inputs violate a documented precondition."""


class DimensionError(InvalidInputError):
    """Allocation or gain arrays do not match the topology."""


class InfeasiblePowerError(JointAllocError, ValueError):
    """No finite bandwidth reaches the threshold at the given power.

    ``floor`` is the power ``c / h`` that must be strictly exceeded.
    """

    def __init__(self, power, floor):
        self.power = power
        self.floor = floor
        super().__init__(
            f"power {power!r} does not exceed the feasibility floor {floor!r}"
        )


class InfeasibleInstanceError(JointAllocError):
    """The thresholds cannot all be met.

    ``certificate`` is the minimum total bandwidth G(N) that the users
    would need (``inf`` when the power floors alone exceed a budget);
    ``phase`` names the transmission phase that failed.
    """

    def __init__(self, message, certificate=None, phase=None):
        self.certificate = certificate
        self.phase = phase
        super().__init__(message)


class InstanceTooLargeError(JointAllocError):
    """Exhaustive search requested above the configured user cap."""


class SolverError(JointAllocError):
    """The barrier solver could not produce a converged point."""


class NoStrictlyFeasibleStartError(SolverError):
    """The supplied starting point violates an inequality constraint."""


class ScenarioFormatError(InvalidInputError):
    """A scenario or config file is malformed; ``field`` names the culprit."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")

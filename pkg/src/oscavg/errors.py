"""Exception types shared across the package."""


class OscavgError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(OscavgError, ValueError):
    """State, matrix, or norm-weight dimensions do not agree."""


class GrowthCertificationError(OscavgError):
    """The nonlinearity carries no global sublinear-growth certificate."""


class ExponentialRangeError(OscavgError):
    """Matrix exponential argument exceeds the internal scaling limits."""


class ResolutionError(OscavgError):
    """Time step too coarse to resolve the fastest oscillation.

    ``min_steps`` is the smallest admissible step count for the offending
    problem.
    """

    def __init__(self, message: str, min_steps: int):
        super().__init__(message)
        self.min_steps = min_steps


class TrajectoryEscapeError(OscavgError):
    """The discrete trajectory left the admissible region (blow-up).

    ``escape_time`` is the last time at which the state was still finite.
    """

    def __init__(self, message: str, escape_time: float):
        super().__init__(message)
        self.escape_time = escape_time


class DegeneratePartitionError(OscavgError):
    """Operator Riemann sum has no complete block on the requested interval."""


class HyperbolicityError(OscavgError):
    """Advection coefficients are not symmetric."""


class RateUnresolvableError(OscavgError):
    """Too few error samples above the solver floor to fit a rate."""


class ConfigError(OscavgError):
    """A run configuration failed validation."""

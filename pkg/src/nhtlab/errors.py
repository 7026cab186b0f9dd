"""Exception hierarchy shared by all nhtlab modules."""


class NHTLabError(Exception):
    """Base class for every error raised by the package."""


class ParameterRangeError(NHTLabError, ValueError):
    """A numerical parameter lies outside the range where the model is meaningful."""


class SeamError(NHTLabError, ValueError):
    """A position symbol does not match across the glued endpoints of the circle."""


class GridMismatchError(NHTLabError, ValueError):
    """Two operators or vectors live on different grids."""


class CoverageError(NHTLabError, ValueError):
    """The grid does not resolve the frequencies a construction needs."""


class AccuracyError(NHTLabError, ArithmeticError):
    """A quadrature or iteration failed to reach its requested accuracy."""


class ConsistencyError(NHTLabError, ArithmeticError):
    """Two independent computations of the same quantity disagree."""


class ConstructionError(NHTLabError, ValueError):
    """An input to a builder violates the construction's preconditions."""


class DampingError(NHTLabError, ArithmeticError):
    """Absorption is too weak at this h for the construction to close up."""


class NearSingularError(NHTLabError, ArithmeticError):
    """An operator that must be inverted is numerically singular."""


class SolverError(NHTLabError, ArithmeticError):
    """A dense eigen/singular value solver did not converge or failed its residual check."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class ProbeError(NHTLabError, ValueError):
    """A probe vector is not microlocalized where the identity under test holds."""


class DomainError(NHTLabError, ValueError):
    """A trajectory left the chart before the computation could finish."""

    def __init__(self, message: str, exit_time: float | None = None):
        super().__init__(message)
        self.exit_time = exit_time


class StiffnessError(NHTLabError, ArithmeticError):
    """The flow integrator's step size underflowed."""


class HorizonError(NHTLabError, ArithmeticError):
    """Expansion rates did not stabilise between horizons T and 2T."""


class ExtractionError(NHTLabError, ArithmeticError):
    """The quotient defining c_+ could not be evaluated stably."""


class ChartError(NHTLabError, ValueError):
    """A chart violates one of its structural invariants."""


class InsufficientDataError(NHTLabError, ValueError):
    """Too few samples for a regression."""


class ConfigError(NHTLabError, ValueError):
    """An experiment configuration is malformed."""

"""Exception hierarchy shared by all modules."""


class OptoTomoError(Exception):
    """Base class for every error raised by this package."""


class DomainError(OptoTomoError, ValueError):
    """Input outside the domain where a formula is defined."""


class UnsatisfiableError(OptoTomoError, ValueError):
    """No parameter value can produce the requested result."""


class PreconditionError(OptoTomoError, ValueError):
    """A documented precondition (sampling, resolution, length) is violated."""


class LODominanceError(OptoTomoError, ValueError):
    """Local oscillator is not strong enough for the linearized homodyne readout."""


class ReconstructionError(OptoTomoError):
    """Tomographic inversion is under-determined."""


class PhysicalityError(ReconstructionError):
    """Reconstructed covariance is not a physical state.

    The raw least-squares fit is kept on ``raw_fit`` for diagnostics.
    """

    def __init__(self, message, raw_fit=None):
        super().__init__(message)
        self.raw_fit = raw_fit


class CoverageError(ReconstructionError):
    """Quadrature angles do not cover [0, pi) well enough."""


class DataError(ReconstructionError):
    """Histogram data is empty or inconsistent."""


class CalibrationError(OptoTomoError):
    """Calibration marker could not be located above threshold."""


class DynamicRangeError(OptoTomoError):
    """Transfer-function normalization would divide by a vanishing response."""

    def __init__(self, message, bins=()):
        super().__init__(message)
        self.bins = list(bins)


class ConfigError(OptoTomoError, ValueError):
    """Scenario configuration could not be parsed or validated."""

"""Exception taxonomy shared by all solver modules."""


class BilictrlError(Exception):
    """Base class for all library errors."""


class BasisMismatchError(BilictrlError):
    """Two spectral objects built on different bases were combined."""


class QuadratureError(BilictrlError):
    """Quadrature refinement did not reach the requested tolerance."""


class HypothesisViolationError(BilictrlError):
    """A coupling coefficient needed as a divisor is numerically zero.

    Carries the offending mode index in ``mode``.
    """

    def __init__(self, message, mode=None):
        super().__init__(message)
        self.mode = mode


class GapConditionError(BilictrlError):
    """The horizon is too short for the frequency gap of the moment family."""


class ConvergenceError(BilictrlError):
    """An iterative solver (fixed point, Newton step, norm monitor) failed."""


class IllPosedError(BilictrlError):
    """Gram system condition number above the configured cap."""


class AccuracyError(BilictrlError):
    """A solution was produced but failed its independent residual check."""


class OutOfNeighborhoodError(BilictrlError):
    """A target lies outside the neighborhood where the construction is valid."""


class ConfigError(BilictrlError):
    """Invalid run configuration (schema violation, bad value, missing file)."""


class TailLeakWarning(UserWarning):
    """Highest retained mode carries a non-negligible share of the state norm."""

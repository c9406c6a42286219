"""Exception hierarchy.

Everything raised on purpose by this package derives from :class:`TvarchError`.
:class:`NumericalError` subclasses signal a failed computation on valid input
(the CLI maps them to exit code 1); the rest are usage or input problems
(exit code 2).
"""


class TvarchError(Exception):
    """Base class for all package errors."""


class ModelError(TvarchError, ValueError):
    """Parameter curves violate positivity or stability constraints."""


class DistributionError(TvarchError, ValueError):
    """Unsupported or invalid innovation distribution."""


class ParseError(TvarchError, ValueError):
    """Malformed input file."""


class BandwidthError(TvarchError, ValueError):
    """Bandwidth too small for the sample (bN < 2)."""


class RangeError(TvarchError, ValueError):
    """Index, horizon or origin outside the available data."""


class NumericalError(TvarchError, ArithmeticError):
    """A computation failed on otherwise valid input."""


class DivergenceError(NumericalError):
    """Lag coefficients sum to one or more, so the unconditional mean is infinite."""


class SingularDesignError(NumericalError):
    """The weighted design matrix is singular or too ill-conditioned.

    Attributes
    ----------
    t0 : int or None
        Centre of the offending window, when known.
    """

    def __init__(self, message, t0=None):
        super().__init__(message)
        self.t0 = t0


class InsufficientWindowError(NumericalError):
    """Too few observations inside the estimation or residual window."""


class NotApplicableError(NumericalError):
    """Procedure preconditions on the estimates are not met."""


class CVError(NumericalError):
    """Cross-validation criterion could not be evaluated at any grid point."""


class GridError(NumericalError):
    """Every bandwidth in the grid was skipped or failed."""


class CIUnreliableError(NumericalError):
    """Too many bootstrap replicates failed to produce an interval."""


class StabilityError(NumericalError):
    """Coefficients imply a non-stationary forecast recursion."""


class DiagnosticError(NumericalError):
    """A statistic is undefined for the input (e.g. zero variance)."""


class InitError(NumericalError):
    """Optimizer objective is not finite at the initial point."""

"""Exception types shared across the package."""


class DivestError(Exception):
    """Base class for all library errors."""


class InvalidDomain(DivestError):
    """Approximation interval is empty, infinite, or outside the target's domain."""


class NonConvergence(DivestError):
    """Remez iteration failed to level within the iteration budget.

    Carries the last iterate so callers can inspect how far it got.
    """

    def __init__(self, message, result=None, spread=None):
        super().__init__(message)
        self.result = result
        self.spread = spread


class NonLatticeInput(DivestError):
    """A count-derived value was not an integer multiple of 1/rate."""


class DimensionMismatch(DivestError):
    """Histograms passed to a two-sample estimator disagree in symbol dimension."""


class RateTooSmall(DivestError):
    """Per-part sampling rate below 2; log-scale thresholds are undefined."""


class EmptyP(DivestError):
    """Plug-in KL needs at least one observed symbol on the P side."""


class EmptyInput(DivestError):
    """Plug-in estimator received an all-zero histogram."""


class InvalidParams(DivestError):
    """Synthetic distribution parameters violate a fixture's preconditions."""


class UnknownEstimator(DivestError):
    """Estimator id not in the registry."""


class UnknownFixture(DivestError):
    """Fixture name not in the registry."""


class InsufficientRows(DivestError):
    """Rate fit needs at least three report rows varying along the chosen axis."""

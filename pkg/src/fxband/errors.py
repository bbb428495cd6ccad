"""Exception types shared across the package."""


class FxbandError(Exception):
    """Base class for all package-specific errors."""


class DegenerateDenominator(FxbandError, ValueError):
    """Model parameters sit on (or too close to) a resonant denominator."""


class DegenerateDistribution(FxbandError, ValueError):
    """A transition law with zero variance was used where a density is required."""


class UnsupportedLaw(FxbandError, ValueError):
    """A scalar distribution variant the quadrature builder does not handle."""


class DomainViolation(FxbandError, ValueError):
    """Arguments violate an ordering or positivity precondition."""


class OrderingCollapse(FxbandError, RuntimeError):
    """The solver drove a band gap (alpha - a or b - alpha) to numerical zero."""


class NoConvergence(FxbandError, RuntimeError):
    """Newton iteration failed to reach the residual tolerance.

    Carries the per-iteration residual norms in ``trace`` for diagnosis.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class ConfigError(FxbandError, ValueError):
    """A problem-description file failed schema validation."""

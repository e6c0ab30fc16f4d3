"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1,
infeasibility and numerical failures exit 3.
"""


class EnergiaError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EnergiaError, ValueError):
    """Invalid configuration: bad flag values, inconsistent metadata, malformed files."""


class NumericsError(EnergiaError, ArithmeticError):
    """Non-finite values or a failed factorization at runtime."""


class SpdFactorizationError(NumericsError):
    """A matrix expected to be symmetric positive definite failed to factor."""


class BoundaryError(EnergiaError):
    """A barrier or constraint function was evaluated at or beyond the domain boundary.

    Carries the offending minimum constraint margin in ``min_margin``.
    """

    def __init__(self, msg, min_margin=None):
        super().__init__(msg)
        self.min_margin = min_margin


class InfeasibleStepError(EnergiaError):
    """The feasibility line search found no admissible step above its floor."""

"""Exception types raised across the package."""

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of a function."""


class ConfigError(ValueError):
    """A simulation or experiment configuration is invalid."""


class InputError(ValueError):
    """Observed data are unusable for the requested computation."""


class DegenerateInputError(InputError):
    """A ratio statistic has a zero denominator (e.g. a constant path)."""


class RegimeError(ValueError):
    """An estimated parameter falls outside the regime a method requires."""


class TruncationError(ArithmeticError):
    """A truncated series could not meet its configured tolerance."""


class FactorizationError(np.linalg.LinAlgError):
    """A covariance matrix could not be factorised even after jitter."""

"""Exception types shared across the package.

Everything raised on purpose derives from :class:`OdengError` so callers can
catch one base class.  The CLI maps :class:`ConfigError` (and subclasses) to
exit code 2 and :class:`NumericalError` / :class:`OptimizationError` to exit
code 3.
"""


class OdengError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(OdengError):
    """Invalid configuration input.

    ``key`` identifies the offending entry by its dotted path inside the
    config document, e.g. ``"correlation.gamma"``.
    """

    def __init__(self, message, key=None):
        self.key = key
        if key:
            message = f"{key}: {message}"
        super().__init__(message)


class ExpressionError(ConfigError):
    """Model expression failed to tokenize, parse or validate.

    ``position`` is the zero-based character offset in the source text where
    the problem was detected, or None when no position applies.
    """

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class DomainError(OdengError):
    """Numeric argument outside the valid range of an operation."""


class SingularDesignError(OdengError):
    """Design matrix is rank deficient, the normal equations cannot be solved."""


class NumericalError(OdengError):
    """A linear-algebra step failed or lost all accuracy.

    Carries the condition number of the offending matrix when one could be
    estimated.
    """

    def __init__(self, message, condition=None):
        self.condition = condition
        if condition is not None:
            message = f"{message} (condition number ~ {condition:.3e})"
        super().__init__(message)


class DegenerateDensityError(OdengError):
    """Polynomial has no positive part worth integrating, no density exists."""


class DegenerateDesignError(OdengError):
    """Quantile transform produced coincident points (flat distribution region)."""


class UnsupportedCriterionError(OdengError):
    """Requested criterion needs model structure the model does not provide."""


class OptimizationError(OdengError):
    """Optimization could not produce a usable result."""


class InvalidStartError(OptimizationError):
    """Objective is not finite at the requested starting point."""


class ConditioningWarning(UserWarning):
    """A matrix passed to an inversion step is close to singular."""

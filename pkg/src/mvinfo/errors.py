"""Exception types shared across the package.

The CLI maps these onto exit codes: ``ValidationError`` -> 2,
``RegimeError`` -> 3, anything else -> 1.
"""


class MVInfoError(Exception):
    """Base class for all errors raised by mvinfo."""


class ValidationError(MVInfoError, ValueError):
    """An input failed a shape, range or normalization check."""


class RegimeError(MVInfoError, ValueError):
    """Parameters fall outside the regime where a bound is defined."""


class InfiniteDivergenceError(ValidationError):
    """KL(p || q) is infinite because q vanishes where p does not."""


class NumericalError(MVInfoError, ArithmeticError):
    """A quantity that must be nonnegative came out clearly negative."""


class LemmaViolation(MVInfoError, AssertionError):
    """A typical-set conclusion failed on a concrete construction."""


class ApproximateOnly(MVInfoError):
    """Exhaustive search exceeded its budget and no fallback was allowed."""


class NondeterminismError(MVInfoError):
    """A training procedure gave different results on identical inputs."""


class UndefinedCorrelationError(ValidationError):
    """Pearson correlation requested for a constant sequence."""

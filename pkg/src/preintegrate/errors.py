"""Exception types shared across the package."""


class PreintegrateError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PreintegrateError, ValueError):
    """Invalid static configuration, e.g. a dimension beyond the direction-number table."""


class DefinitenessError(PreintegrateError, ValueError):
    """A matrix expected to be positive definite is not."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class NumericalError(PreintegrateError, ArithmeticError):
    """An iterative method failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class EvaluationError(PreintegrateError, ArithmeticError):
    """An integrand returned a non-finite value."""

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class MonotonicityError(PreintegrateError, ValueError):
    """The pre-integration column has mixed signs, so the kink closed form is invalid."""


class DegenerateInputError(PreintegrateError, ValueError):
    """An estimator was given an input with zero variance where positive variance is required."""

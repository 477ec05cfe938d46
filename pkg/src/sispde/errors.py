"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid parameters or configuration.

    Attributes:
        fields: names of the offending fields, when known.
    """

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = tuple(fields)


class CoefficientError(ValueError):
    """General-form coefficients fail the sampled admissibility checks."""


class NumericalFailure(RuntimeError):
    """A computation produced non-finite values or could not proceed."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SingularSystemError(NumericalFailure):
    """Tridiagonal system with a zero pivot."""

    def __init__(self, message, pivot):
        super().__init__(message)
        self.pivot = pivot


class EigenConvergenceError(NumericalFailure):
    """The tridiagonal eigensolver did not converge for one eigenpair."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


class QuadratureError(NumericalFailure):
    """Quadrature did not converge on a subinterval."""

    def __init__(self, message, interval):
        super().__init__(message)
        self.interval = tuple(interval)


class DivergentNormError(ValueError):
    """A weighted norm is infinite for the given field."""


class ZeroNormError(ValueError):
    """A decay fit was requested for a field whose norm vanishes."""

"""Exception hierarchy.

Every error raised on purpose by this package derives from
:class:`ContractionError`, and the parameter errors also derive from
:class:`ValueError` so callers that only know the stdlib still catch them.
"""


class ContractionError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(ContractionError, ValueError):
    pass


class InvalidTruncationError(ContractionError, ValueError):
    pass


class InvalidOrderError(ContractionError, ValueError):
    pass


class InvalidParameterError(ContractionError, ValueError):
    pass


class InvalidInputError(ContractionError, ValueError):
    pass


class OutOfDomainError(ContractionError, ValueError):
    pass


class DegenerateStateError(ContractionError, ValueError):
    """A spectrum with zero trace cannot be normalized to a density matrix."""


class ConsistencyError(ContractionError, RuntimeError):
    """An internal invariant was violated (e.g. moment monotonicity)."""


class NumericalFailureError(ContractionError, ArithmeticError):
    """A numerical routine did not converge.

    ``diagnostics`` carries whatever the failing routine could report
    (condition estimates, iteration counts, error estimates).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class InversionFailureError(NumericalFailureError):
    def __init__(self, message, error_estimate, diagnostics=None):
        super().__init__(message, diagnostics)
        self.error_estimate = float(error_estimate)

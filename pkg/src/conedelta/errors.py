"""Exception types raised across the package."""


class ConeDeltaError(Exception):
    """Base class for all package errors."""


class InvalidInput(ConeDeltaError, ValueError):
    """A physical or numerical precondition was violated by the caller."""


class NumericalFailure(ConeDeltaError, RuntimeError):
    """A quadrature, root finder, factorization or eigensolver did not converge."""

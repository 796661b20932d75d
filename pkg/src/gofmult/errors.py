"""Exception types raised across the package."""


class GofError(Exception):
    """Base class for all package errors."""


class DomainError(GofError, ValueError):
    """Parameter vector outside the family's parameter domain."""


class DegenerateData(GofError, ValueError):
    """Data cannot support estimation (e.g. a zero-variance column)."""


class NonConvergence(GofError, RuntimeError):
    """The optimizer hit its iteration cap."""


class SingularInformation(GofError, RuntimeError):
    """Estimated information matrix is not positive definite or is too ill-conditioned."""


class NumericalFailure(GofError, RuntimeError):
    """A numerical routine produced no finite value."""


class ReplicateFailure(GofError, RuntimeError):
    """Too many bootstrap replicates failed to refit."""

    def __init__(self, message, failures=0, total=0):
        super().__init__(message)
        self.failures = failures
        self.total = total


#: Exceptions that signal a failed fit rather than a programming error.
FIT_ERRORS = (DomainError, DegenerateData, NonConvergence, SingularInformation, NumericalFailure)

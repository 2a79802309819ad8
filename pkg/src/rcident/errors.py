"""Exception hierarchy shared by all modules.

The command-line harness maps ``ValidationError`` (and subclasses) to exit
code 2 and ``NumericalFailure`` to exit code 3.
"""


class ValidationError(ValueError):
    """Input rejected before any numerical work was done."""


class DataError(ValidationError):
    """Input data violates a type invariant (non-finite, wrong sign, ...)."""


class PreconditionError(ValidationError):
    """An operation was called outside its domain of validity."""


class InsufficientOrderError(ValidationError):
    """Too few moments or grid points to run the requested test."""


class NumericalFailure(RuntimeError):
    """A numerical routine failed (ill-conditioning, non-convergence)."""


class IllConditionedError(NumericalFailure):
    """A linear system exceeded the declared condition-number guard."""

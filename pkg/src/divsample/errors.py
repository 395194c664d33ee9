"""Exception hierarchy shared across the package.

The CLI maps each class to a fixed exit status, so library code raises the
most specific class that applies.
"""


class DivsampleError(ValueError):
    """Base class for all errors raised by this package."""

    exit_code = 1


class UsageError(DivsampleError):
    """An argument is outside its allowed range or flags conflict."""

    exit_code = 2


class DataError(DivsampleError):
    """Input data is malformed (unparsable file, dimension mismatch, ...)."""

    exit_code = 3


class DegenerateDataError(DivsampleError):
    """Input is well formed but numerically degenerate (zero variance, ...)."""

    exit_code = 4

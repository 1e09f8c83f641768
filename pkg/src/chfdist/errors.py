"""Exception types and their process exit codes.

Exit-code convention: 0 success, 1 validation failure, 2 usage/input error,
3 numeric/convergence error. Validation failures (a check ran and reported
"out of tolerance") are return values, not exceptions, so every exception
here maps to 2 or 3.
"""


class ChfdistError(Exception):
    """Base class; exit_code drives the CLI exit status."""

    exit_code = 2


class ParseError(ChfdistError):
    """Malformed input text; message carries the offending line number."""


class OrderingError(ChfdistError):
    """A column required to be monotone is not."""


class InsufficientDataError(ChfdistError):
    """Too few records/bins to proceed."""


class GridError(ChfdistError):
    """Non-uniform, mismatched, or misaligned frequency grid."""


class DomainError(ChfdistError):
    """Argument outside the mathematical domain of an operation."""


class ConvergenceError(ChfdistError):
    """Truncation/tail criterion violated in strict mode."""

    exit_code = 3


class SaturationError(ChfdistError):
    """Sample fell outside the periodic-extension domain in strict mode."""

    exit_code = 3

"""Exception hierarchy.

Everything raised on purpose by the package derives from :class:`GGSError`,
so callers (and the CLI) can separate our failures from programming errors.
"""


class GGSError(Exception):
    """Base class for all package errors."""


class StructuralError(GGSError, ValueError):
    """Invalid series shape, breakpoints, or index arguments."""


class IndexBoundsError(StructuralError, IndexError):
    pass


class EmptySegmentError(StructuralError):
    pass


class UnsplittableSegmentError(StructuralError):
    pass


class NothingToRemoveError(StructuralError):
    pass


class DimensionError(StructuralError):
    pass


class InfeasibleError(GGSError, ValueError):
    """More breakpoints requested than the series can hold."""


class TooLargeError(GGSError, ValueError):
    """Exhaustive search would exceed the enumeration guard."""


class ConfigError(GGSError, ValueError):
    pass


class NumericError(GGSError, ArithmeticError):
    """Cholesky failed, or other non-finite arithmetic."""


class NonConvergenceError(NumericError):
    pass


class ParseError(GGSError, ValueError):
    """Malformed input file. Carries the 1-based row/column when known."""

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column

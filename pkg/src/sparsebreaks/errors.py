"""Exception and warning types raised across the package."""

from __future__ import annotations


class SparseBreaksError(Exception):
    """Base class for every error raised by :mod:`sparsebreaks`."""


class DimensionMismatch(SparseBreaksError, ValueError):
    pass


class NonFiniteEntry(SparseBreaksError, ValueError):
    pass


class EmptyPanel(SparseBreaksError, ValueError):
    pass


class DegenerateDesign(SparseBreaksError, ValueError):
    pass


class IndexOutOfRange(SparseBreaksError, IndexError):
    pass


class NoMatchingLambda(SparseBreaksError, ValueError):
    pass


class ZeroResidual(SparseBreaksError, ValueError):
    """The residual target is identically zero, so no lambda grid exists."""


class SeriesTooShort(SparseBreaksError, ValueError):
    pass


class RankTooLarge(SparseBreaksError, ValueError):
    pass


class SingularBetaGram(SparseBreaksError, ValueError):
    pass


class InvalidSchedule(SparseBreaksError, ValueError):
    pass


class UnstableSystem(SparseBreaksError, ValueError):
    pass


class ParseError(SparseBreaksError, ValueError):
    """Malformed CSV input; ``row`` and ``column`` locate the offending cell."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class NonMonotonicDates(SparseBreaksError, ValueError):
    pass


class IoError(SparseBreaksError, OSError):
    pass


class NotConvergedWarning(UserWarning):
    """Solver hit ``max_sweeps`` before its KKT certificate was met."""

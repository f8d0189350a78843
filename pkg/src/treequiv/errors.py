"""Shared exception types.

Exit-code mapping used by the CLI: ParseError -> 2, BudgetError -> 3,
property violations -> 1, everything fine -> 0.
"""

from __future__ import annotations


class TreequivError(Exception):
    """Base class for all package errors."""


class ParseError(TreequivError):
    """Syntax or well-formedness error in a text input (structure, formula, tree, ...)."""

    def __init__(self, message: str, *, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)


class BudgetError(TreequivError):
    """A configured resource cap (oracle size, enumeration count, rank) was exceeded."""


class ArityError(TreequivError):
    """An operation was applied to a number of arguments outside its allowed arities."""


class UnsupportedShapeError(TreequivError):
    """The input tree uses a shape the requested transformation does not handle."""


class FingerprintCollisionError(TreequivError):
    """Two distinct canonical type serializations produced the same digest."""


class InfeasibleScaleError(TreequivError):
    """No pump/splice schedule reaches the requested size interval."""

    def __init__(self, message: str, achievable: tuple[int, ...] = ()):
        self.achievable = tuple(sorted(set(achievable)))
        if self.achievable:
            message += f"; nearest achievable sizes: {list(self.achievable)}"
        super().__init__(message)

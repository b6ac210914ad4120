"""Exception types shared across the package."""

from __future__ import annotations


class QuantpaveError(Exception):
    """Base class for all quantpave errors."""


class DimensionMismatch(QuantpaveError):
    """Operands have incompatible dimensions or dimension names."""


class UnsplittableAxis(QuantpaveError):
    """Bisection was requested along an axis with no interior float."""


class ExprParseError(QuantpaveError):
    """Syntax or scope error while parsing an expression.

    `position` is the 0-based character offset of the offending token."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class NonDyadicRegion(QuantpaveError):
    """A region passed to embed is not reachable by bisection of the root."""


class OutsideDomain(QuantpaveError):
    """A point or box lies outside the domain it is queried against."""


class SystemValidationError(QuantpaveError):
    """A discrete-time system description failed validation.

    `problems` lists every violation found."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems

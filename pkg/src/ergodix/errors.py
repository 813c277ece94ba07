"""Exception types shared across the package."""

from __future__ import annotations


class ErgodixError(Exception):
    """Base class for all package errors."""


class ModelError(ErgodixError, ValueError):
    """A game or operator description violates its structural invariants."""


class DimensionError(ErgodixError, ValueError):
    """A vector does not match the state count of the operator."""


class EvaluationError(ErgodixError, ArithmeticError):
    """An operator could not be evaluated (domain error, NaN, overflow)."""


class ProbeError(EvaluationError):
    """Evaluation failed while probing limits along a scaling schedule."""

    def __init__(self, message: str, *, state: int | None, tail: frozenset[int], alpha: float):
        super().__init__(message)
        self.state = state
        self.tail = tail
        self.alpha = alpha


class NumericFailure(EvaluationError):
    """An iterative method produced non-finite or runaway values."""

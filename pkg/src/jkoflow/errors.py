"""Shared exception types.

Split by what the caller can do about the failure: fix the arguments
(InvalidInputError, DomainError), shrink the problem (CapacityError),
or loosen tolerances / inspect the residual (NumericalFailureError).
"""

from __future__ import annotations


class InvalidInputError(ValueError):
    """Structurally bad input: wrong shapes, unsorted positions, mismatched sizes."""


class DomainError(ValueError):
    """Scalar argument outside its admissible range (e.g. a quantile level not in [0, 1])."""


class CapacityError(ValueError):
    """Problem size exceeds a documented limit (e.g. the exhaustive LP cap)."""


class NumericalFailureError(RuntimeError):
    """An iterative routine failed to reach its tolerance.

    Carries the residual at the point of failure so callers can report it.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual

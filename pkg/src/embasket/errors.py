"""Exception types raised across the package."""
from __future__ import annotations


class EmBasketError(Exception):
    """Base class for all package errors."""


class DomainError(EmBasketError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class TenorRangeError(DomainError):
    """A maturity lies outside the grid a curve was estimated on."""


class RatingRangeError(DomainError):
    """A rating grade outside A+ ... B-."""


class MissingBarrierError(EmBasketError, KeyError):
    """A crossing record was asked for a barrier level it does not contain."""


class DegenerateCreditError(EmBasketError):
    """Risky PV01 is zero: the entity is certain to have defaulted."""


class FitError(EmBasketError):
    """The sector curve fit cannot be carried out on the supplied quotes."""


class UnderdeterminedError(EmBasketError):
    """Too little information to identify the requested parameters."""


class NonConvergenceError(EmBasketError):
    """Calibration failed to reach the rejection threshold.

    The best point found is kept on the exception so callers can inspect it.
    """

    def __init__(self, message: str, best=None, objective: float = float("nan"), label: str = ""):
        super().__init__(message)
        self.best = best
        self.objective = objective
        self.label = label


class SchemaError(EmBasketError, ValueError):
    """An input file does not match its schema."""

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class MissingParametersError(EmBasketError, KeyError):
    """No calibrated parameters were supplied for a requested rating."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""

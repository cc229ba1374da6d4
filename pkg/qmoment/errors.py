from typing import Any, Optional


class QMomentError(Exception):
    """Base class for every failure raised by a qmoment operation."""

    kind = "computation_error"

    def __init__(self, message: str, detail: Optional[Any] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail


class StateValidationError(QMomentError, ValueError):
    kind = "invalid_state"


class SectorMismatchError(QMomentError, ValueError):
    kind = "sector_mismatch"


class AnnihilationError(QMomentError):
    kind = "annihilated"


class OutsidePolytopeError(QMomentError, ValueError):
    kind = "outside_polytope"


class UnknownStateError(QMomentError, KeyError):
    kind = "unknown_state"


class BudgetExceededError(QMomentError):
    """Iteration or enumeration budget ran out; ``partial`` holds what was computed."""

    kind = "budget_exceeded"

    def __init__(self, message: str, partial: Any = None):
        super().__init__(message, detail=None)
        self.partial = partial


class UnsupportedSizeError(QMomentError, ValueError):
    kind = "unsupported_size"

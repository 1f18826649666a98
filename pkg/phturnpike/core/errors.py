"""Exception hierarchy; every error knows the CLI exit code it maps to."""

from typing import Any, Dict, Optional


class PhTurnpikeError(Exception):
    exit_code: int = 4

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = dict(details or {})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": self.details,
        }


class InputFormatError(PhTurnpikeError):
    """Unreadable or malformed input file"""

    exit_code = 1


class StructureError(PhTurnpikeError):
    """Input violates a structural precondition"""

    exit_code = 2


class ShapeError(StructureError, ValueError):
    pass


class IrregularPencilError(StructureError):
    pass


class IndexTooHighError(StructureError):
    def __init__(self, index: int, message: Optional[str] = None) -> None:
        super().__init__(message or f"pencil index {index} is not supported here", {"index": index})
        self.index = index


class DegenerateProblemError(StructureError):
    pass


class InfeasibleProblemError(PhTurnpikeError):
    exit_code = 3


class NumericalError(PhTurnpikeError):
    exit_code = 4


class SingularShiftError(NumericalError):
    """mu*E - A is singular at the chosen shift"""


class ReductionError(NumericalError):
    pass


class SolverError(NumericalError):
    pass

"""
Exception hierarchy for shiftbench

Input problems derive from ``InputValidationError`` (also a ``ValueError``),
numerical failures from ``EstimationError`` (also an ``ArithmeticError``).
The CLI maps the two families to distinct exit codes.
"""

from typing import Any, Dict, Optional


class ShiftBenchError(Exception):
    """Base class for all shiftbench errors"""

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "message": self.message, **self.details}


class InputValidationError(ShiftBenchError, ValueError):
    """Malformed or inconsistent input"""


class EstimationError(ShiftBenchError, ArithmeticError):
    """A computation could not produce a valid result"""


class NegativeEntry(InputValidationError):
    pass


class SumOutOfTolerance(InputValidationError):
    pass


class DimensionTooSmall(InputValidationError):
    pass


class DimensionMismatch(InputValidationError):
    pass


class NonFiniteLogits(InputValidationError):
    pass


class EmptyBatch(InputValidationError):
    pass


class EmptyInput(InputValidationError):
    pass


class ZeroSourceEntry(InputValidationError):
    """A source prior entry is zero where the prior update divides by it"""


class MissingValidation(InputValidationError):
    pass


class SingleClassBatch(InputValidationError):
    pass


class InvalidAlpha(InputValidationError):
    pass


class InvalidTemperature(InputValidationError):
    pass


class MissingRequiredClass(InputValidationError):
    """A class with positive target mass is absent from the labeled pool"""


class ClassWithNoValidationSamples(InputValidationError):
    pass


class MatrixFileError(InputValidationError):
    """A CSV input could not be parsed"""

    def __init__(
        self, message: str, path: Optional[str] = None, line: Optional[int] = None
    ) -> None:
        location = f"{path}:{line}: " if path and line else f"{path}: " if path else ""
        super().__init__(f"{location}{message}", path=path, line=line)


class DegenerateSupport(EstimationError):
    """The prior update normaliser is exactly zero"""


class SingularConfusion(EstimationError):
    pass


class EmptyConfidentSet(EstimationError):
    """No test row reaches the confidence threshold"""


class NoConvergence(EstimationError):
    """An iterative fit hit its iteration cap in strict mode"""


__all__ = [
    "ShiftBenchError",
    "InputValidationError",
    "EstimationError",
    "NegativeEntry",
    "SumOutOfTolerance",
    "DimensionTooSmall",
    "DimensionMismatch",
    "NonFiniteLogits",
    "EmptyBatch",
    "EmptyInput",
    "ZeroSourceEntry",
    "MissingValidation",
    "SingleClassBatch",
    "InvalidAlpha",
    "InvalidTemperature",
    "MissingRequiredClass",
    "ClassWithNoValidationSamples",
    "MatrixFileError",
    "DegenerateSupport",
    "SingularConfusion",
    "EmptyConfidentSet",
    "NoConvergence",
]

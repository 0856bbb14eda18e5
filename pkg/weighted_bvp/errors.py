"""Exception hierarchy shared by the services and the CLI handlers.

Input errors map to exit code 1, numerical failures to exit code 2.
"""

from typing import Any, Optional, Tuple


class BvpError(Exception):
    """Base class for every error raised by weighted_bvp."""


class BvpInputError(BvpError):
    """The caller handed us data that violates a precondition."""


class BvpNumericalError(BvpError):
    """An algorithm could not deliver a result within its limits."""


class InvalidParameter(BvpInputError):
    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class IndexOutOfRange(BvpInputError):
    pass


class ShapeMismatch(BvpInputError):
    pass


class GridWeightError(BvpInputError):
    """A weight table entry breaks the grid constraints at node (i, j)."""

    def __init__(self, message: str, node: Tuple[int, int]):
        super().__init__(message)
        self.node = node


class BoundaryWeightNonzero(GridWeightError):
    pass


class NonpositiveInteriorWeight(GridWeightError):
    pass


class UnknownKind(BvpInputError):
    pass


class TabulatedOutOfRange(BvpInputError):
    pass


class EndpointNotBelowZero(BvpInputError):
    pass


class NonpositiveDenominator(BvpInputError):
    pass


class RangeInvalid(BvpInputError):
    pass


class EmptySweep(BvpInputError):
    pass


class ParseError(BvpInputError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column


class ValidationError(BvpInputError):
    """Problem file content is invalid; `location` is a JSON pointer."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location or '/'}: {message}")
        self.location = location
        self.reason = message


class JacobiNonconvergent(BvpNumericalError):
    pass


class QuadratureNonconvergent(BvpNumericalError):
    pass


class SingularJacobian(BvpNumericalError):
    pass


class MaxItersExceeded(BvpNumericalError):
    """Raised on demand for an unconverged solve; keeps the best-so-far report."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report

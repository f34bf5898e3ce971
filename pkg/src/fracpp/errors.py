"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 for configuration and
parameter problems, 3 for numerical failures, 4 for I/O.
"""

from __future__ import annotations


class FracppError(Exception):
    exit_code = 1


class ParameterDomainError(FracppError, ValueError):
    """A parameter lies outside the supported envelope."""

    exit_code = 2


class ShapeError(FracppError, ValueError):
    exit_code = 2


class ConfigError(FracppError):
    exit_code = 2


class ExprSyntaxError(ConfigError):
    """Raised by the expression parser.

    ``offset`` is the 1-based character column of the offending token
    (end of input reports ``len(src) + 1``).
    """

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = tuple(expected)
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class ExprEvalError(ConfigError, ArithmeticError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")


class NumericalError(FracppError):
    exit_code = 3


class ConvergenceError(NumericalError):
    def __init__(self, message: str, residual_history=()):
        self.residual_history = list(residual_history)
        super().__init__(message)


class AccuracyError(NumericalError):
    def __init__(self, message: str, estimate: float):
        self.estimate = estimate
        super().__init__(f"{message} (achieved error estimate {estimate:.3e})")


class IllPosedSystemError(NumericalError):
    """A tridiagonal system is not strictly diagonally dominant."""


class AdmissibilityError(NumericalError):
    def __init__(self, message: str, condition: str):
        self.condition = condition
        super().__init__(f"{message} [violates {condition}]")

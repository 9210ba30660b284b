"""Exception hierarchy.

Each error carries the process exit code the CLI maps it to.
"""

from __future__ import annotations


class SemibootError(Exception):
    exit_code = 1


class InvalidArgumentError(SemibootError, ValueError):
    exit_code = 2


class SchemaError(InvalidArgumentError):
    """Input file does not match the declared model schema."""


class UnsupportedModelError(InvalidArgumentError):
    pass


class NotABootstrapSchemeError(InvalidArgumentError):
    pass


class InsufficientReplicatesError(InvalidArgumentError):
    pass


class DegenerateRiskSetError(SemibootError, ArithmeticError):
    exit_code = 3


class SingularDesignError(SemibootError, ArithmeticError):
    exit_code = 3

    def __init__(self, message: str, column: str | None = None):
        super().__init__(message)
        self.column = column


class IterationLimitError(SemibootError, RuntimeError):
    exit_code = 3

    def __init__(self, message: str, last_iterate=None, residual: float | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class CurvatureError(SemibootError, ArithmeticError):
    exit_code = 3


class UnstableBootstrapError(SemibootError, RuntimeError):
    exit_code = 4

    def __init__(self, message: str, failures: int = 0, total: int = 0, diagnostics=None):
        super().__init__(message)
        self.failures = failures
        self.total = total
        self.diagnostics = diagnostics or []

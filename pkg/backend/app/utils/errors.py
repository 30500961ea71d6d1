"""Exception types raised by the estimation services."""

from typing import Optional


class DomainError(ValueError):
    """Argument outside the domain of a function."""


class NotPositiveDefiniteError(DomainError):
    """Cholesky factorization met a non-positive pivot."""

    def __init__(self, index: int, pivot: Optional[float] = None):
        self.index = index
        self.pivot = pivot
        detail = f" (pivot {pivot:.6g})" if pivot is not None else ""
        super().__init__(f"Matrix is not positive definite: non-positive pivot at index {index}{detail}")


class DimensionMismatchError(ValueError):
    """Two inputs disagree in dimension."""

    def __init__(self, what: str, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"Dimension mismatch for {what}: expected {expected}, got {actual}")


class MatrixFormatError(ValueError):
    """A matrix or vector file failed to parse or validate."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[int] = None):
        self.row = row
        self.column = column
        if row is not None and column is not None:
            message = f"{message} at ({row}, {column})"
        elif row is not None:
            message = f"{message} at row {row}"
        super().__init__(message)


class QuadratureError(RuntimeError):
    """Numerical integration did not converge."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        self.diagnostics = diagnostics or {}
        if self.diagnostics:
            message = f"{message}: {self.diagnostics}"
        super().__init__(message)


class SpecSyntaxError(ValueError):
    """A textual spec (structure, null distribution, list flag) is malformed."""

    def __init__(self, message: str, token: Optional[str] = None):
        self.token = token
        if token is not None:
            message = f"{message}: '{token}'"
        super().__init__(message)

"""Exception hierarchy shared by every module."""

from __future__ import annotations


class CulError(Exception):
    """Base class for all library errors."""


class InvalidArgument(CulError, ValueError):
    pass


class OutOfRange(InvalidArgument):
    pass


class NumericFailure(CulError, ArithmeticError):
    """A nonfinite value appeared during evaluation or optimization."""

    def __init__(self, message: str, iteration: int | None = None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class ConstraintViolation(CulError):
    """A Phase II run finished with f1 above its constraint level."""

    def __init__(self, message: str, index: int):
        super().__init__(f"{message} (epsilon index {index})")
        self.index = index


class DegenerateSeries(InvalidArgument):
    pass


class FormatError(CulError):
    """A checkpoint file failed validation."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset

"""Exception types shared across the package."""


class LabError(Exception):
    """Base class for every domain error raised by this package."""


class InvalidInstanceError(LabError):
    """A constraint set violates a structural invariant (indices, distinctness)."""


class InvalidParameterError(LabError):
    """An argument is outside its documented domain."""


class InvalidInputError(LabError):
    """Mismatched or malformed user-supplied data (files, coordinate shapes)."""


class UndefinedDensityError(LabError):
    """Density queries on a graph with no edges."""


class CannotSplitError(LabError):
    """Part-tag dependent operation called on an untagged graph."""


class DivergenceError(LabError):
    """Training produced a non-finite loss."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite loss at step {step}")

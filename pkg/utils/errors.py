from typing import Optional


class ModelError(Exception):
    """Base class for every failure raised by the model."""


class ConfigError(ModelError, ValueError):
    """Invalid scenario configuration or violated physical precondition.

    Args:
        message: Human readable description
        field: Dotted path of the offending config field, if known
    """

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class DataError(ModelError, ValueError):
    """Unreadable or degenerate measurement data."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(location + message)


class ConvergenceError(ModelError, RuntimeError):
    """A series, solver or fit did not reach its tolerance.

    Attributes:
        partial: Best value available when iteration stopped
        iterations: Number of iterations performed
    """

    def __init__(self, message: str, partial=None, iterations: int = 0):
        self.partial = partial
        self.iterations = iterations
        super().__init__(message)


class BracketError(ConvergenceError):
    """The Rabi-rate bracket does not contain a single maximum."""

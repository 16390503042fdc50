"""Exception types shared across the package."""


class FormatError(ValueError):
    """Raised when a binary image stream is malformed.

    Carries the byte offset at which parsing failed, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver hits its iteration cap."""


class SchemaError(ValueError):
    """Raised when a parameter or report document fails schema validation."""

class PersonNetError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(PersonNetError, ValueError):
    pass


class NumericError(PersonNetError, ArithmeticError):
    pass


class ConfigError(PersonNetError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(PersonNetError, ValueError):
    """Malformed binary file. ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class IngestionError(PersonNetError, ValueError):
    pass


class SamplingError(PersonNetError, RuntimeError):
    pass


class ProtocolError(PersonNetError, ValueError):
    pass


class UsageError(PersonNetError, RuntimeError):
    pass

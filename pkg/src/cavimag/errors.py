"""Exception hierarchy."""


class CavimagError(Exception):
    """Base class for all package errors."""


class ConfigurationError(CavimagError, ValueError):
    """Invalid simulation setup: bad mesh, bad parameters, bad config file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)

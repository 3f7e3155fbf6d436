"""Exception hierarchy shared by the package and the CLI exit-code mapping."""


class IntermodalError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(IntermodalError, ValueError):
    pass


class GraphError(IntermodalError, ValueError):
    pass


class ParseError(IntermodalError, ValueError):
    """Malformed TNTP input; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnreachableError(IntermodalError):
    pass


class NumericalFailure(IntermodalError):
    """The LP solver stopped without a trustworthy answer."""

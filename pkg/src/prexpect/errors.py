class PrexpectError(Exception):
    """Base class for all errors raised by the package."""


class ParseError(PrexpectError):
    def __init__(self, message, line=None, column=None, origin="<inline>"):
        self.line = line
        self.column = column
        self.origin = origin
        where = f"{origin}:{line}:{column}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ElaborationError(PrexpectError):
    """Undeclared names, bad domains, ill-formed expectations."""


class DomainViolation(PrexpectError):
    """An assignment left a variable's declared domain or an array index was out of bounds."""

    def __init__(self, message, state=None, value=None):
        self.state = state
        self.value = value
        super().__init__(message)


class SpaceMismatch(PrexpectError):
    pass


class ConfigLimitExceeded(PrexpectError):
    pass

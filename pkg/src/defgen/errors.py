"""Exception hierarchy shared by all pipeline stages.

``UserError`` subclasses signal problems the caller can fix (bad flags, bad
input data, missing ingredients); everything else under ``PipelineError`` is
a runtime failure (I/O, network).  The CLI maps the two branches to exit
codes 1 and 2.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class UserError(PipelineError):
    """Input or configuration mistake; fixable by the caller."""


class ConfigError(UserError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class MissingColumn(UserError):
    pass


class MalformedRow(UserError):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class MalformedLine(UserError):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class MissingIngredient(UserError):
    pass


class UnsupportedLanguage(UserError):
    pass


class LanguageMismatch(UserError):
    pass


class EmptyPredictions(UserError):
    pass


class IoFailure(PipelineError):
    pass


class EndpointUnreachable(PipelineError):
    pass


class BadResponse(PipelineError):
    pass


class DimensionMismatch(PipelineError):
    pass


class ZeroVector(PipelineError):
    pass


class EmptyInput(UserError):
    pass


class EmptyGroup(UserError):
    pass


class EmptyReference(UserError):
    pass


class EmptySide(UserError):
    pass


class LengthMismatch(UserError):
    pass


class PortInUse(PipelineError):
    pass

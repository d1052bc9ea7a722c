"""Exception hierarchy shared by every stage of the pipeline."""


class PebgError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""

    exit_code = 1


class ParseError(PebgError):
    exit_code = 3

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDatasetError(PebgError):
    exit_code = 4


class SplitError(PebgError):
    exit_code = 4


class ConfigError(PebgError):
    exit_code = 2


class StructuralError(PebgError):
    """Graph structure does not support the requested computation."""

    exit_code = 5


class NumericalError(PebgError):
    """A loss or parameter became NaN/Inf; ``term`` names the offender."""

    exit_code = 6

    def __init__(self, term, detail=""):
        self.term = term
        msg = f"non-finite value in {term}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class MetricError(PebgError):
    exit_code = 7

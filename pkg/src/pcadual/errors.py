"""Exception hierarchy; each class carries the CLI exit code it maps to."""

from __future__ import annotations


class PCAError(Exception):
    exit_code = 1


class ConfigurationError(PCAError, ValueError):
    """Bad parameters, size caps, malformed model files or patterns."""

    exit_code = 2


class ParseError(ConfigurationError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class PreconditionError(ConfigurationError):
    pass


class CertificationError(PCAError):
    """Model is not in class C, or is not ergodic (D >= 1)."""

    exit_code = 3

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class DegenerateModelError(PCAError):
    """D = 0 or a point-mass invariant measure; use the closed form instead."""

    exit_code = 3


class ResourceError(PCAError):
    exit_code = 4

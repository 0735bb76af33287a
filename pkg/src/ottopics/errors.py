"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: validation problems exit 2,
numeric/stability problems exit 3, and file/parse problems exit 4.
"""


class OttopicsError(Exception):
    """Base class for all package errors."""


class ValidationError(OttopicsError, ValueError):
    """Invalid configuration or arguments (bad sizes, ranges, flags)."""


class ShapeError(ValidationError):
    """Array dimensions do not line up."""


class EmptyCorpusError(ValidationError):
    """Every document was filtered away, or the vocabulary came out empty."""


class NumericError(OttopicsError, ArithmeticError):
    """Non-finite values where finite ones are required."""


class StabilityError(NumericError):
    """A scaling iteration blew up; usually fixed by a larger epsilon."""


class ParseError(OttopicsError, ValueError):
    """A file failed to parse. Carries the offending line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        super().__init__(prefix + message)

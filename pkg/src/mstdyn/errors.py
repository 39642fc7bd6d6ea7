"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: ConfigError -> 2, DataError (and its
subclasses) -> 3, FitError -> 4.
"""


class MstdynError(Exception):
    """Base class for all library errors."""


class ConfigError(MstdynError):
    """Invalid configuration (unknown key, bad value, missing input)."""


class DataError(MstdynError):
    """Input data violates a contract (bad prices, empty panel, ...)."""


class ParseError(DataError):
    """Malformed input record; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DimensionError(DataError):
    """Input too small for the requested operation."""


class FitError(MstdynError):
    """A parameter fit could not be performed."""


class KernelError(MstdynError):
    """A transition kernel violates its invariants (row mass, range)."""

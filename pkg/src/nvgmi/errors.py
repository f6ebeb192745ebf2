"""Exception hierarchy.

Every error raised on purpose by the package derives from ``NvGmiError`` so
the CLI can map it to an exit status without catching unrelated bugs.
"""


class NvGmiError(Exception):
    """Base class for all package errors."""


class InvalidArgument(NvGmiError, ValueError):
    pass


class ProtocolError(NvGmiError):
    """A pulse sequence is malformed or cannot be executed."""

    def __init__(self, message, segment_index=None):
        if segment_index is not None:
            message = f"segment {segment_index}: {message}"
        super().__init__(message)
        self.segment_index = segment_index


class OutOfRegime(NvGmiError):
    """Requested evaluation lies outside the model's numerical regime."""


class SingularityError(NvGmiError):
    pass


class FitFailure(NvGmiError):
    """Least-squares fit did not converge; ``best`` holds the best-so-far result."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InsufficientData(NvGmiError):
    pass


class UndefinedContrast(NvGmiError):
    pass


class CalibrationFailure(NvGmiError):
    pass


class UnderdeterminedCell(NvGmiError):
    pass


class ConfigError(NvGmiError):
    """Configuration schema violation, reported with the offending field path."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path

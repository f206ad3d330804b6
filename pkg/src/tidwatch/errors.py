"""Exception taxonomy shared across the pipeline.

The CLI maps these onto exit codes: ConfigError -> 1, DataFormatError -> 2,
NumericError -> 3.
"""


class TidwatchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TidwatchError):
    """A configuration value violates a documented precondition."""


class DataFormatError(TidwatchError):
    """An input file or stream does not match its documented schema."""


class ChecksumError(DataFormatError):
    """A binary artifact failed its integrity check."""


class VersionError(DataFormatError):
    """A binary artifact was written by an incompatible format version."""


class NumericError(TidwatchError):
    """A computation produced non-finite values where finite ones are required."""

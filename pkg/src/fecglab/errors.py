"""Exception taxonomy shared across the package.

Input-contract violations raise RejectedInput, bad layer/grid wiring raises
StructuralError, and on-disk format problems get their own subclasses so
callers can distinguish a stale file from a corrupted one.
"""


class FecgLabError(Exception):
    """Base class for all package errors."""


class RejectedInput(FecgLabError, ValueError):
    """An argument violates a documented precondition."""


class ConfigError(FecgLabError, ValueError):
    """A configuration object is internally inconsistent."""


class StructuralError(FecgLabError, ValueError):
    """Shapes or channel counts do not line up."""


class UndefinedMetric(FecgLabError, ValueError):
    """A metric has no defined value for the given inputs."""


class NumericalError(FecgLabError, RuntimeError):
    """A numerical procedure produced non-finite or unusable values."""


class FileFormatError(FecgLabError, IOError):
    """Base class for on-disk record/checkpoint problems."""


class VersionError(FileFormatError):
    """File was written by an incompatible format version."""


class ChecksumError(FileFormatError):
    """Stored checksum does not match the payload."""


class TruncatedFileError(FileFormatError):
    """File ends before the declared payload does."""

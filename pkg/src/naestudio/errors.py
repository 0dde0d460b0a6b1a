"""Exception taxonomy shared across the package."""


class NaestudioError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(NaestudioError):
    """Invalid configuration values (STFT params, network config, train config)."""


class InputError(NaestudioError):
    """Invalid input data: empty signals, negative magnitudes, bad indices."""


class ShapeError(NaestudioError):
    """Matrix or signal dimensions do not match the expected shapes."""


class FormatError(NaestudioError):
    """Unsupported or malformed file encoding."""


class NumericError(NaestudioError):
    """Non-finite values encountered during numeric computation."""


class IoError(NaestudioError):
    """Filesystem read or write failure."""


class ProvenanceError(NaestudioError):
    """A recorded provenance hash does not match the actual input."""

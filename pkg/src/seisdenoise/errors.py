"""Exception hierarchy.

Exit-code mapping used by the CLI: ConfigError -> 2, numeric/stability
errors -> 3, file/format errors -> 4.
"""


class SeisError(Exception):
    """Base class for all package errors."""


class ParameterError(SeisError, ValueError):
    """A constructor or operation argument is out of its documented range."""


class GeometryError(SeisError, ValueError):
    """Sources/receivers inconsistent with the model grid or with each other."""


class StabilityError(SeisError, ValueError):
    """Numerical stability condition violated (CFL, sampling)."""


class ApertureError(SeisError, ValueError):
    """Too few surface positions for the multiple-prediction integral."""


class ShapeError(SeisError, ValueError):
    """Tensor/array shape mismatch."""


class IntegrityError(SeisError, ValueError):
    """Checkpoint/config fingerprint mismatch or corrupted state."""


class CoverageError(SeisError, ValueError):
    """Patches do not cover the requested output panel."""


class NormalizationError(SeisError, ValueError):
    """Data violates the non-negative normalization contract of the loss."""


class UndefinedSnrError(SeisError, ZeroDivisionError):
    """SNR requested against a zero-energy reference."""


class TrainingDivergedError(SeisError, ArithmeticError):
    """Non-finite loss or gradient encountered during training."""


class FileFormatError(SeisError, IOError):
    """Malformed binary file (bad magic, truncation, non-finite payload)."""


class ConfigError(SeisError, ValueError):
    """Invalid run configuration (unknown key, missing field, bad value)."""

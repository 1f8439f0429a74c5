"""Exception types raised by the public API."""


class LocoError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(LocoError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class DimensionTooLarge(LocoError, ValueError):
    """The operation would materialize a dense matrix above its size cap."""


class SingularMatrix(LocoError, ArithmeticError):
    """A pivot fell below the singularity threshold during LU elimination.

    For Cayley inputs this signals corrupted data, not an expected
    condition: ``I - A`` is provably nonsingular when ``A`` is skew.
    """


class NotSkewSymmetric(LocoError, ValueError):
    """Input failed the skew-symmetry check (``A^T != -A`` beyond tolerance)."""


class InvalidRank(LocoError, ValueError):
    """Requested factor rank is outside ``1 <= r <= d``."""


class InvalidGrid(LocoError, ValueError):
    """A sweep grid is empty or contains out-of-range values."""


class BlockMismatch(LocoError, ValueError):
    """Block size does not evenly divide the feature dimension."""


class ZeroReflector(LocoError, ValueError):
    """A Householder reflector vector is identically zero."""


class ConfigUnsupported(LocoError, ValueError):
    """A benchmark grid point cannot be run for the requested method."""


class CheckpointFormatError(LocoError, ValueError):
    """An adapter checkpoint file has a bad magic, version, or layout."""

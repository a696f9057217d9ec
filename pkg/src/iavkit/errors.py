"""Exception types raised across the toolkit.

Every error the library raises deliberately derives from :class:`IavkitError`
so callers can catch toolkit failures with a single except clause while
still letting programming errors (TypeError etc.) propagate untouched.
"""


class IavkitError(Exception):
    """Base class for all toolkit errors."""


class ZeroVectorError(IavkitError):
    """A vector with zero L2 norm was passed where a direction is required."""


class ShapeMismatchError(IavkitError):
    """Array shape does not match what the operation requires."""


class NonFiniteInputError(IavkitError):
    """Input contains NaN or infinity."""


class ManifestMissingError(IavkitError):
    """Bundle directory has no manifest.json."""


class ChecksumMismatchError(IavkitError):
    """Stored CRC-32 does not match the file on disk."""


class InvariantViolationError(IavkitError):
    """Loaded data violates a bundle invariant (e.g. attention row sum)."""


class IoFailureError(IavkitError):
    """Filesystem write/read failed."""


class InvalidConfigError(IavkitError):
    """Model or analysis configuration is inconsistent."""


class DegenerateRowError(IavkitError):
    """Attention row has no mass left over the image patches."""


class IndexOutOfRangeError(IavkitError, IndexError):
    """Sample, class, layer or head index out of range."""


class EmptyBundleError(IavkitError):
    """Operation requires at least one sample."""


class NotAProbabilityVectorError(IavkitError):
    """Vector is not non-negative and summing to one."""


class SampleOrderMismatchError(IavkitError):
    """Two bundles do not contain the same samples in the same order."""


class MissingImagesError(IavkitError):
    """Bundle has no images array but the operation needs pixels."""


class GridMismatchError(IavkitError):
    """Jigsaw grid size does not divide the image dimensions."""


class TooFewPointsError(IavkitError):
    """Embedding needs more input points."""

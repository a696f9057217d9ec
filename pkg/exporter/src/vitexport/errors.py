"""Exporter error types."""


class ExportError(Exception):
    """Base class for exporter failures."""


class ModelUnavailableError(ExportError):
    """Model id unknown, or weights could not be obtained."""


class DatasetUnavailableError(ExportError):
    """Dataset id unknown, or the data is not present locally."""


class HookFailureError(ExportError):
    """The architecture exposes no per-head attention to hook."""


class OutOfMemoryError(ExportError):
    """Inference ran out of memory; carries batch-size guidance."""

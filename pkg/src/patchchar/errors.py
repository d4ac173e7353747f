"""Exception types shared across the package."""


class PatchcharError(Exception):
    """Base class for all package errors."""


class ConfigError(PatchcharError):
    """Invalid experiment configuration or unknown registry name."""


class ImageFormatError(PatchcharError):
    """Malformed netpbm file. Carries the byte offset where parsing failed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class OutOfBoundsError(PatchcharError):
    """A requested window or rectangle does not fit inside the image."""


class ParameterError(PatchcharError):
    """An operator parameter is outside its declared range."""


class ZeroVarianceError(PatchcharError):
    """A correlation-style measure was asked for on a constant patch.

    Callers decide policy; the sweep harness maps this to an excluded sample.
    """


class DegenerateInputError(PatchcharError):
    """Input that leaves a statistic undefined (empty lists, all-excluded cells)."""

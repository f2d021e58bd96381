"""Exception hierarchy shared by every module."""


class HdrtvError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(HdrtvError, ValueError):
    """Tensor dimensions do not satisfy an operation's contract."""


class StateError(HdrtvError, ValueError):
    """An ImageFrame carries the wrong colorimetry tags for an operation."""


class ConfigError(HdrtvError, ValueError):
    """Invalid configuration or parameter value."""


class NonFiniteError(HdrtvError, ValueError):
    """A tensor was constructed from data containing NaN or Inf."""


class MissingWeightError(HdrtvError, KeyError):
    """A required tensor is absent from the weight store."""

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"missing weight tensor {self.name!r}"


class CorruptWeights(HdrtvError):
    """The weights container failed structural or CRC validation."""


class IoError(HdrtvError, OSError):
    """A file could not be read or written."""

    def __init__(self, path, cause):
        super().__init__(f"{path}: {cause}")
        self.path = str(path)
        self.cause = cause


class UnsupportedFormat(IoError):
    """The file is a valid image but not in a supported pixel format."""

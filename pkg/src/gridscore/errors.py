"""Exception hierarchy shared by every gridscore module."""


class GridscoreError(Exception):
    """Base class for all library errors."""


class ValidationError(GridscoreError, ValueError):
    """Input data violates a documented precondition."""


class ShapeError(ValidationError):
    """Array shapes are incompatible for the requested operation."""


class GeometryError(ValidationError):
    """Spatial dimensions are too small for a convolution or pooling step."""


class ArchitectureError(GeometryError):
    """A model architecture cannot be realised on its input shape."""


class ContractError(GridscoreError, RuntimeError):
    """A backward pass was handed a cache that its forward call did not produce."""


class InfeasiblePartitionError(ValidationError):
    """A sample partition cannot satisfy its per-category size constraints."""


class GenerationError(GridscoreError, RuntimeError):
    """The synthetic renderer could not place a figure on the grid."""


class ParseError(ValidationError):
    """Malformed raster input; ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ConfigError(ValidationError):
    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.key = key


class CheckpointError(GridscoreError, OSError):
    """Base class for checkpoint decoding failures."""


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass

"""Exception hierarchy shared across the toolkit."""


class ToolTrackError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ToolTrackError):
    """Invalid or inconsistent configuration input."""


class DataError(ToolTrackError):
    """Unreadable, malformed, or out-of-contract input data."""


class SequenceGapError(DataError):
    """A frame number is missing from an otherwise contiguous sequence."""


class FrameFormatError(DataError):
    """A frame file violates the sequence format (size, bit depth, numbering)."""


class GeometryError(ToolTrackError):
    """Degenerate geometry: collinear hulls, zero-length edges, duplicate corners."""


class ProjectionError(DataError):
    """A 3D point cannot be projected (at or behind the camera plane)."""


class InvariantError(ToolTrackError):
    """An internal pipeline invariant was violated; indicates a bug, not bad input."""


# CLI exit codes.
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

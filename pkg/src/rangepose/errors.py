"""Exception types shared across the package."""


class RangePoseError(Exception):
    """Base class for all package-specific errors."""


class FormatError(RangePoseError):
    """A depth-grid file could not be parsed.

    Carries the 1-based line number (and column, when known) of the
    offending token so callers can point at the bad spot.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class DimensionError(RangePoseError):
    """Grid dimensions violate the minimum 3x3 requirement or do not agree."""


class BoundsError(RangePoseError):
    """A crop or region spec falls outside the image it addresses."""


class EmptyProjectionError(RangePoseError):
    """Every point of a cloud fell outside the projection extents."""


class FaceSpecError(RangePoseError):
    """Synthetic face parameters are inconsistent (e.g. features would
    destroy the nose-maximum construction)."""


class NoseNotFound(RangePoseError):
    """No usable nose-tip maximum exists in the image."""


class EyeCornersNotFound(RangePoseError):
    """Fewer than two curvature maxima survived in the eye search region."""


class ManifestError(RangePoseError):
    """A dataset manifest is missing, malformed, or references bad files."""

"""Range-image container and depth-grid I/O.

A range image is a rectangular grid of depth samples with a validity
mask. Depth is stored normalized so that a LARGER value means CLOSER to
the sensor; loaders for sources that record distance-from-sensor must
negate (``invert=True``). Two on-disk formats are supported:

* ``csv``   - one grid row per line, comma-separated decimal depths,
              empty cell = invalid. Round-trips float64 bit-exactly.
* ``pgm16`` - binary PGM (magic ``P5``, maxval 65535), sample value 0
              reserved for invalid pixels. Calibration (offset/scale
              back to millimeters) rides in header comments; foreign
              PGMs without them load as raw sample values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionError,
    EmptyProjectionError,
    FormatError,
)

MIN_EXTENT = 3

_FORMATS = ("csv", "pgm16")


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RangeImage:
    """Immutable depth grid plus validity mask.

    Invalid pixels hold a 0.0 sentinel in ``depth`` and must never be
    read by numeric kernels. Arrays are marked read-only so instances
    are safe to share between threads.
    """

    depth: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        depth = np.asarray(self.depth, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if depth.ndim != 2 or valid.shape != depth.shape:
            raise DimensionError(
                f"depth {depth.shape} and valid {valid.shape} must be matching 2-D grids"
            )
        h, w = depth.shape
        if h < MIN_EXTENT or w < MIN_EXTENT:
            raise DimensionError(f"grid must be at least {MIN_EXTENT}x{MIN_EXTENT}, got {h}x{w}")
        if not np.all(np.isfinite(depth[valid])):
            raise ValueError("non-finite depth at a valid pixel")
        # Canonicalize the sentinel so array equality is meaningful.
        depth = depth.copy()
        depth[~valid] = 0.0
        object.__setattr__(self, "depth", _as_readonly(depth))
        object.__setattr__(self, "valid", _as_readonly(valid.copy()))

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def valid_count(self) -> int:
        return int(self.valid.sum())

    def same_grid(self, other: "RangeImage") -> bool:
        """True when both images agree pixel-for-pixel (mask and depth)."""
        return (
            self.depth.shape == other.depth.shape
            and bool(np.array_equal(self.valid, other.valid))
            and bool(np.array_equal(self.depth, other.depth))
        )


@dataclass(frozen=True)
class PointCloud:
    """Unordered (x, y, z) samples in millimeters."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", _as_readonly(pts))

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class GridSpec:
    """Mapping from world (x, y) extents onto a pixel grid.

    Columns span ``x_range`` left to right, rows span ``y_range`` top to
    bottom, so a smaller y lands on a smaller row index ("above").
    """

    width: int
    height: int
    x_range: tuple[float, float]
    y_range: tuple[float, float]

    def __post_init__(self):
        if self.width < MIN_EXTENT or self.height < MIN_EXTENT:
            raise DimensionError(
                f"grid must be at least {MIN_EXTENT}x{MIN_EXTENT}, got {self.height}x{self.width}"
            )
        x0, x1 = self.x_range
        y0, y1 = self.y_range
        if not (math.isfinite(x0) and math.isfinite(x1) and x0 < x1):
            raise ValueError(f"x_range must be a non-degenerate interval, got {self.x_range}")
        if not (math.isfinite(y0) and math.isfinite(y1) and y0 < y1):
            raise ValueError(f"y_range must be a non-degenerate interval, got {self.y_range}")

    @property
    def pitch_x(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / self.width

    @property
    def pitch_y(self) -> float:
        return (self.y_range[1] - self.y_range[0]) / self.height

    def cell_of(self, x: float, y: float) -> tuple[int, int] | None:
        """(row, col) of the cell containing the point, or None if outside.

        The upper edge of each range belongs to the last cell.
        """
        x0, x1 = self.x_range
        y0, y1 = self.y_range
        if not (x0 <= x <= x1 and y0 <= y <= y1):
            return None
        col = min(int((x - x0) / self.pitch_x), self.width - 1)
        row = min(int((y - y0) / self.pitch_y), self.height - 1)
        return row, col


def _infer_format(path: Path, format: str | None) -> str:
    if format is not None:
        if format not in _FORMATS:
            raise ValueError(f"unknown format {format!r}; expected one of {_FORMATS}")
        return format
    suffix = path.suffix.lower().lstrip(".")
    if suffix == "csv":
        return "csv"
    if suffix in ("pgm", "pgm16"):
        return "pgm16"
    raise ValueError(f"cannot infer format from {path.name!r}; pass format explicitly")


def load_depth_grid(path, format: str | None = None, invert: bool = False) -> RangeImage:
    """Load a depth grid from disk.

    ``invert`` negates depths on load, for sources whose convention is
    distance-from-sensor rather than the normalized closer-is-larger.
    """
    p = Path(path)
    fmt = _infer_format(p, format)
    if fmt == "csv":
        img = _load_csv(p)
    else:
        img = _load_pgm16(p)
    if invert:
        img = RangeImage(np.where(img.valid, -img.depth, 0.0), img.valid)
    return img


def save_depth_grid(image: RangeImage, path, format: str | None = None) -> None:
    p = Path(path)
    fmt = _infer_format(p, format)
    if fmt == "csv":
        _save_csv(image, p)
    else:
        _save_pgm16(image, p)


def _load_csv(path: Path) -> RangeImage:
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    while lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError(f"{path}: empty file", line=1)
    rows: list[list[float]] = []
    mask: list[list[bool]] = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise FormatError(
                f"{path}: ragged row, expected {width} cells, got {len(cells)}", line=lineno
            )
        drow, vrow = [], []
        for colno, cell in enumerate(cells, start=1):
            cell = cell.strip()
            if cell == "":
                drow.append(0.0)
                vrow.append(False)
                continue
            try:
                value = float(cell)
            except ValueError as exc:
                raise FormatError(
                    f"{path}: bad depth value {cell!r}", line=lineno, column=colno
                ) from exc
            if not math.isfinite(value):
                raise FormatError(
                    f"{path}: non-finite depth {cell!r}", line=lineno, column=colno
                )
            drow.append(value)
            vrow.append(True)
        rows.append(drow)
        mask.append(vrow)
    return RangeImage(np.array(rows), np.array(mask))


def _save_csv(image: RangeImage, path: Path) -> None:
    lines = []
    for r in range(image.height):
        cells = [
            repr(float(image.depth[r, c])) if image.valid[r, c] else ""
            for c in range(image.width)
        ]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


_PGM_MAXVAL = 65535
_OFFSET_TAG = "# depth-offset "
_SCALE_TAG = "# depth-scale "


def _save_pgm16(image: RangeImage, path: Path) -> None:
    valid = image.valid
    if valid.any():
        dmin = float(image.depth[valid].min())
        dmax = float(image.depth[valid].max())
    else:
        dmin = dmax = 0.0
    # Valid samples quantize onto 1..65535; 0 stays the invalid sentinel.
    scale = (dmax - dmin) / (_PGM_MAXVAL - 1) if dmax > dmin else 1.0
    raw = np.zeros(image.depth.shape, dtype=np.uint16)
    q = np.rint((image.depth - dmin) / scale) + 1
    raw[valid] = np.clip(q[valid], 1, _PGM_MAXVAL).astype(np.uint16)
    header = (
        f"P5\n{_OFFSET_TAG}{dmin!r}\n{_SCALE_TAG}{scale!r}\n"
        f"{image.width} {image.height}\n{_PGM_MAXVAL}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(raw.astype(">u2").tobytes())


def _load_pgm16(path: Path) -> RangeImage:
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if not blob.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM (missing P5 magic)", line=1)

    offset_val, scale_val = None, None
    tokens: list[int] = []
    pos = 2
    line = 1
    while len(tokens) < 3:
        if pos >= len(blob):
            raise FormatError(f"{path}: truncated PGM header", line=line)
        ch = blob[pos : pos + 1]
        if ch == b"\n":
            line += 1
            pos += 1
        elif ch in b" \t\r":
            pos += 1
        elif ch == b"#":
            end = blob.find(b"\n", pos)
            if end == -1:
                end = len(blob)
            comment = blob[pos:end].decode("ascii", "replace")
            if comment.startswith(_OFFSET_TAG):
                offset_val = float(comment[len(_OFFSET_TAG):])
            elif comment.startswith(_SCALE_TAG):
                scale_val = float(comment[len(_SCALE_TAG):])
            pos = end
        else:
            end = pos
            while end < len(blob) and blob[end : end + 1] not in b" \t\r\n#":
                end += 1
            word = blob[pos:end]
            try:
                tokens.append(int(word))
            except ValueError as exc:
                raise FormatError(
                    f"{path}: bad header token {word!r}", line=line
                ) from exc
            pos = end
    width, height, maxval = tokens
    if maxval != _PGM_MAXVAL:
        raise FormatError(f"{path}: expected maxval {_PGM_MAXVAL}, got {maxval}", line=line)
    # Exactly one whitespace byte separates the header from the raster.
    if pos >= len(blob) or blob[pos : pos + 1] not in b" \t\r\n":
        raise FormatError(f"{path}: malformed raster separator", line=line)
    pos += 1
    expected = width * height * 2
    raster = blob[pos : pos + expected]
    if len(raster) != expected:
        raise FormatError(
            f"{path}: raster has {len(raster)} bytes, expected {expected}", line=line
        )
    raw = np.frombuffer(raster, dtype=">u2").reshape(height, width).astype(np.float64)
    valid = raw > 0
    if offset_val is not None and scale_val is not None:
        depth = offset_val + (raw - 1) * scale_val
    else:
        depth = raw
    depth[~valid] = 0.0
    return RangeImage(depth, valid)


def project_to_range(cloud: PointCloud, spec: GridSpec) -> RangeImage:
    """Render a cloud onto the grid; the closest point (largest z) wins each cell.

    Deterministic and independent of point order. Cells hit by no point
    are invalid. Raises EmptyProjectionError when nothing lands on-grid.
    """
    pts = cloud.points
    if len(cloud) < 9:
        raise ValueError(f"projection needs at least 9 points, got {len(cloud)}")
    x0, x1 = spec.x_range
    y0, y1 = spec.y_range
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    inside = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
    if not inside.any():
        raise EmptyProjectionError("all points fall outside the grid extents")
    cols = np.minimum(((x[inside] - x0) / spec.pitch_x).astype(np.int64), spec.width - 1)
    rows = np.minimum(((y[inside] - y0) / spec.pitch_y).astype(np.int64), spec.height - 1)
    grid = np.full((spec.height, spec.width), -np.inf)
    np.maximum.at(grid, (rows, cols), z[inside])
    valid = np.isfinite(grid)
    grid[~valid] = 0.0
    return RangeImage(grid, valid)

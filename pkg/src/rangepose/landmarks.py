"""Facial landmark detection on range images.

Nose tip: the interior pixel whose fully-valid 3x3 neighborhood has the
largest depth sum (depth is normalized closer-is-larger, so the nose is
the protrusion toward the sensor). Eye corners: the two strongest
curvature maxima in a band above the nose, kept apart by non-maximum
suppression. Curvature comes from a per-pixel least-squares quadric fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .errors import EyeCornersNotFound, NoseNotFound
from .rangeio import RangeImage

SCORE_MODES = ("mean", "gaussian", "principal")

# Curvature magnitudes below this are numerical residue of a flat fit
# (radius beyond 10^9 mm); such pixels never qualify as corners.
FLAT_SCORE_FLOOR = 1e-9


@dataclass(frozen=True)
class Landmark:
    """A feature point: pixel location plus the depth recorded there."""

    row: int
    col: int
    depth: float


@dataclass(frozen=True)
class CurvatureMap:
    """Per-pixel surface curvatures of the depth grid.

    ``mean`` (H, 1/mm), ``gauss`` (K, 1/mm^2) and principal curvatures
    ``k1 >= k2`` are defined only where ``defined`` is True: the fit
    window must lie fully inside the image and contain no invalid pixel.
    Undefined entries hold NaN.
    """

    mean: np.ndarray
    gauss: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    defined: np.ndarray

    def score(self, mode: str = "mean") -> np.ndarray:
        """Corner-strength field: |H|, |K|, or max principal magnitude."""
        if mode == "mean":
            s = np.abs(self.mean)
        elif mode == "gaussian":
            s = np.abs(self.gauss)
        elif mode == "principal":
            s = np.maximum(np.abs(self.k1), np.abs(self.k2))
        else:
            raise ValueError(f"unknown score mode {mode!r}; expected one of {SCORE_MODES}")
        return np.where(self.defined, s, 0.0)


@dataclass(frozen=True)
class EyeRoiSpec:
    """Eye-corner search band and selection parameters.

    The band covers rows [nose.row - above_max, nose.row - above_min]
    over all columns; it sits strictly above the nose so nostril and
    nose-bridge curvature outliers cannot win.
    """

    above_min: int = 5
    above_max: int = 35
    suppression_radius: float = 8.0
    score_mode: str = "mean"

    def __post_init__(self):
        if not 0 <= self.above_min < self.above_max:
            raise ValueError(f"need 0 <= above_min < above_max, got {self}")
        if self.suppression_radius <= 0:
            raise ValueError(f"suppression radius must be positive, got {self}")
        if self.score_mode not in SCORE_MODES:
            raise ValueError(f"unknown score mode {self.score_mode!r}")


@dataclass(frozen=True)
class EyeCorners:
    """The two detected inner eye corners, ordered left to right
    (first.col <= second.col), each with its curvature score."""

    first: Landmark
    second: Landmark
    first_score: float
    second_score: float

    def as_rows(self) -> list[tuple[int, int, float]]:
        """(row, col, curvature) report triples, one per corner."""
        return [
            (self.first.row, self.first.col, self.first_score),
            (self.second.row, self.second.col, self.second_score),
        ]


def detect_nose_tip(image: RangeImage) -> Landmark:
    """Locate the nose tip as the maximum 3x3 neighborhood depth sum.

    Only interior pixels whose full 3x3 window is valid are eligible;
    ties break in row-major scan order. When every eligible window sum
    is identical the surface carries no protrusion to find and
    NoseNotFound is raised (a constant grid has no nose).
    """
    windows = sliding_window_view(image.depth, (3, 3))
    valid_windows = sliding_window_view(image.valid, (3, 3))
    eligible = valid_windows.all(axis=(2, 3))
    if not eligible.any():
        raise NoseNotFound("no fully-valid 3x3 window in the image")
    sums = windows.sum(axis=(2, 3))
    candidate = np.where(eligible, sums, -np.inf)
    if eligible.sum() > 1:
        vals = sums[eligible]
        vmax, vmin = float(vals.max()), float(vals.min())
        # ties to within float precision mean a flat surface, not a nose
        if vmax - vmin <= 1e-12 * max(1.0, abs(vmax)):
            raise NoseNotFound("all 3x3 window sums tie; surface has no maximum")
    flat = int(np.argmax(candidate))
    r, c = divmod(flat, candidate.shape[1])
    row, col = r + 1, c + 1
    return Landmark(row, col, float(image.depth[row, col]))


def _quadric_kernels(fit_window: int, pitch: float) -> np.ndarray:
    """Least-squares solve kernels for z = a u^2 + b uv + c v^2 + d u + e v + f.

    With a fixed fully-valid window the design matrix is identical at
    every pixel, so the normal-equation pseudoinverse collapses into six
    correlation kernels, one per coefficient.
    """
    r = fit_window // 2
    offsets = np.arange(-r, r + 1, dtype=np.float64) * pitch
    u, v = np.meshgrid(offsets, offsets)  # u = horizontal (col), v = vertical (row)
    u = u.ravel()
    v = v.ravel()
    design = np.column_stack([u * u, u * v, v * v, u, v, np.ones_like(u)])
    pinv = np.linalg.pinv(design)  # (6, n)
    return pinv.reshape(6, fit_window, fit_window)


def curvature_map(image: RangeImage, fit_window: int = 7, pixel_pitch: float = 1.0) -> CurvatureMap:
    """Mean/Gaussian/principal curvatures from a local quadric fit.

    At each defined pixel the window depths are fit by least squares to
    z = a u^2 + b uv + c v^2 + d u + e v + f (u, v in mm), then

        H = ((1 + e^2) 2a - 2 d e b + (1 + d^2) 2c) / (2 (1 + d^2 + e^2)^(3/2))
        K = (4 a c - b^2) / (1 + d^2 + e^2)^2
        k1, k2 = H +- sqrt(max(H^2 - K, 0))

    Pixels whose window leaves the image or touches an invalid pixel are
    undefined.
    """
    if fit_window < 5 or fit_window % 2 == 0:
        raise ValueError(f"fit window must be odd and >= 5, got {fit_window}")
    if pixel_pitch <= 0:
        raise ValueError(f"pixel pitch must be positive, got {pixel_pitch}")
    r = fit_window // 2
    kernels = _quadric_kernels(fit_window, pixel_pitch)

    coeffs = np.stack(
        [ndimage.correlate(image.depth, k, mode="constant", cval=0.0) for k in kernels]
    )
    a, b, c, d, e = coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4]

    window_ok = (
        ndimage.uniform_filter(image.valid.astype(np.float64), size=fit_window, mode="constant")
        * fit_window**2
    )
    defined = window_ok > fit_window**2 - 0.5
    defined[:r, :] = False
    defined[-r:, :] = False
    defined[:, :r] = False
    defined[:, -r:] = False

    grad2 = 1.0 + d * d + e * e
    mean = ((1.0 + e * e) * 2.0 * a - 2.0 * d * e * b + (1.0 + d * d) * 2.0 * c) / (
        2.0 * grad2**1.5
    )
    gauss = (4.0 * a * c - b * b) / (grad2 * grad2)
    disc = np.sqrt(np.maximum(mean * mean - gauss, 0.0))
    k1 = mean + disc
    k2 = mean - disc

    nanfill = lambda arr: np.where(defined, arr, np.nan)
    return CurvatureMap(nanfill(mean), nanfill(gauss), nanfill(k1), nanfill(k2), defined)


def detect_eye_corners(
    image: RangeImage,
    curv: CurvatureMap,
    nose: Landmark,
    roi: EyeRoiSpec | None = None,
) -> EyeCorners:
    """Pick the two strongest curvature maxima in the band above the nose.

    Greedy non-maximum suppression: take the best-scoring defined pixel,
    knock out everything within the suppression radius, take the next.
    Zero-score pixels never qualify (a flat surface has no corners).
    """
    roi = roi or EyeRoiSpec()
    score = curv.score(roi.score_mode).copy()

    band_top = nose.row - roi.above_max
    band_bottom = nose.row - roi.above_min  # inclusive
    lo = max(band_top, 0)
    hi = min(band_bottom + 1, image.height)
    if lo >= hi:
        raise EyeCornersNotFound(
            f"eye search band [{band_top}, {band_bottom}] lies outside the image"
        )
    mask = np.zeros_like(score, dtype=bool)
    mask[lo:hi, :] = True
    score[~mask] = 0.0

    picks: list[tuple[int, int, float]] = []
    for _ in range(2):
        flat = int(np.argmax(score))
        r, c = divmod(flat, score.shape[1])
        s = float(score[r, c])
        if s <= FLAT_SCORE_FLOOR:
            break
        picks.append((r, c, s))
        rr, cc = np.ogrid[: score.shape[0], : score.shape[1]]
        within = (rr - r) ** 2 + (cc - c) ** 2 < roi.suppression_radius**2
        score[within] = 0.0

    if len(picks) < 2:
        raise EyeCornersNotFound(
            f"found {len(picks)} curvature maxima in the eye band, need 2"
        )
    picks.sort(key=lambda p: (p[1], p[0]))
    (r1, c1, s1), (r2, c2, s2) = picks
    return EyeCorners(
        Landmark(r1, c1, float(image.depth[r1, c1])),
        Landmark(r2, c2, float(image.depth[r2, c2])),
        s1,
        s2,
    )


def format_corner(row: int, col: int, curvature: float) -> str:
    """Render one corner as the report's 'row col curvature' triple,
    curvature at 6 decimal places."""
    return f"{row} {col} {curvature:.6f}"

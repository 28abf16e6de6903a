"""End-to-end single-pair pipeline: preprocess, landmark, classify.

RunConfig bundles every tunable of the stages; defaults match the
per-module defaults, with no crop (the crop window depends on the
source framing and is configuration, not policy).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .landmarks import (
    CurvatureMap,
    EyeCorners,
    EyeRoiSpec,
    Landmark,
    curvature_map,
    detect_eye_corners,
    detect_nose_tip,
)
from .poseclassify import ClassifierConfig, PoseInput, PoseReport, classify_pose
from .preprocess import CropSpec, SmoothSpec, crop_face, gaussian_smooth, otsu_threshold
from .rangeio import RangeImage


@dataclass(frozen=True)
class RunConfig:
    crop: CropSpec | None = None
    smooth: SmoothSpec = field(default_factory=SmoothSpec)
    epsilon: float = 2.0
    fit_window: int = 7
    pixel_pitch: float = 1.0
    eye_roi: EyeRoiSpec = field(default_factory=EyeRoiSpec)


@dataclass(frozen=True)
class ImageLandmarks:
    """Everything the landmark stage produced for one image."""

    nose: Landmark
    eyes: EyeCorners
    curvature: CurvatureMap
    processed: RangeImage


def preprocess_image(image: RangeImage, config: RunConfig) -> RangeImage:
    """Crop, background-threshold, and smooth one range image."""
    if config.crop is not None:
        image = crop_face(image, config.crop)
    image = otsu_threshold(image).image
    return gaussian_smooth(image, config.smooth)


def extract_landmarks(image: RangeImage, config: RunConfig | None = None) -> ImageLandmarks:
    """Run preprocessing plus nose and eye-corner detection on one image."""
    config = config or RunConfig()
    processed = preprocess_image(image, config)
    nose = detect_nose_tip(processed)
    curv = curvature_map(processed, config.fit_window, config.pixel_pitch)
    eyes = detect_eye_corners(processed, curv, nose, config.eye_roi)
    return ImageLandmarks(nose, eyes, curv, processed)


def detect_pose(
    frontal: RangeImage, rotated: RangeImage, config: RunConfig | None = None
) -> tuple[PoseReport, ImageLandmarks, ImageLandmarks]:
    """Classify the rotated image against the frontal reference.

    Returns the report plus both images' landmark bundles for reporting.
    """
    config = config or RunConfig()
    front = extract_landmarks(frontal, config)
    rot = extract_landmarks(rotated, config)
    inp = PoseInput(
        frontal_nose=front.nose,
        rotated_nose=rot.nose,
        rotated_eyes=rot.eyes,
        frontal_eyes=front.eyes,
    )
    report = classify_pose(inp, ClassifierConfig(config.epsilon))
    return report, front, rot

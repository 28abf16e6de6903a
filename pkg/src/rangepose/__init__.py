"""rangepose: face pose-orientation detection from range images.

Pipeline: preprocess (crop, Otsu background split, normalized-convolution
smoothing) -> landmarks (nose tip by 3x3 maximum depth sum, inner eye
corners by curvature analysis) -> classify the rotation axis (X, Y, Z or
frontal) from the landmark deviations. Ships with a synthetic labeled
face generator and an evaluation harness.
"""

from .errors import (
    BoundsError,
    DimensionError,
    EmptyProjectionError,
    EyeCornersNotFound,
    FaceSpecError,
    FormatError,
    ManifestError,
    NoseNotFound,
    RangePoseError,
)
from .evalharness import AccuracyTable, EvalRow, evaluate, parse_table_csv, render_table
from .landmarks import (
    CurvatureMap,
    EyeCorners,
    EyeRoiSpec,
    Landmark,
    curvature_map,
    detect_eye_corners,
    detect_nose_tip,
)
from .pipeline import RunConfig, detect_pose, extract_landmarks, preprocess_image
from .poseclassify import (
    ClassifierConfig,
    PoseClass,
    PoseInput,
    PoseReport,
    classify_pose,
    decide_pose,
)
from .preprocess import (
    CropSpec,
    OtsuResult,
    SmoothSpec,
    crop_face,
    gaussian_smooth,
    otsu_threshold,
)
from .rangeio import (
    GridSpec,
    PointCloud,
    RangeImage,
    load_depth_grid,
    project_to_range,
    save_depth_grid,
)
from .synthface import (
    LabeledSample,
    RotationSpec,
    SyntheticFaceSpec,
    TruthLandmarks,
    default_sweep,
    generate_face,
    make_dataset,
    read_dataset,
    rotate_cloud,
    subject_specs,
    write_dataset,
)

__version__ = "0.1.0"

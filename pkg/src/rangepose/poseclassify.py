"""Rotation-axis classification from frontal/rotated landmark pairs.

The decision uses three deviations only (depth never enters, since it
varies with pose):

* ``diff`` - vertical misalignment of the rotated eye corners. Rolling
  the head (Z) is the only rotation that takes the eyes off a common
  horizontal line, so diff above the tolerance epsilon means Z.
* ``dcol`` / ``drow`` - horizontal / vertical displacement of the nose
  tip between the frontal and rotated images. Yaw (Y) moves the nose
  sideways more than vertically; pitch (X) does the converse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .landmarks import EyeCorners, Landmark

DEFAULT_EPSILON = 2.0


class PoseClass(str, Enum):
    ROTATED_X = "rotated-x"
    ROTATED_Y = "rotated-y"
    ROTATED_Z = "rotated-z"
    FRONTAL = "frontal"

    def __str__(self) -> str:  # report-friendly spelling
        return self.value


@dataclass(frozen=True)
class ClassifierConfig:
    """Tolerance on the eye-line misalignment, in pixels of the grid."""

    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class PoseInput:
    """Landmarks feeding one classification.

    Frontal eye corners are accepted for reporting only; the decision
    never reads them. All landmarks must come from images of identical
    grid dimensions.
    """

    frontal_nose: Landmark
    rotated_nose: Landmark
    rotated_eyes: EyeCorners
    frontal_eyes: EyeCorners | None = None


@dataclass(frozen=True)
class PoseReport:
    """Verdict plus the numbers that produced it.

    The pose is reproducible from (eye_line_diff, nose_dcol, nose_drow,
    epsilon) alone; ``trace`` records each comparison in order.
    """

    pose: PoseClass
    eye_line_diff: float
    nose_dcol: float
    nose_drow: float
    epsilon: float
    trace: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "pose": self.pose.value,
            "eye_line_diff": self.eye_line_diff,
            "nose_dcol": self.nose_dcol,
            "nose_drow": self.nose_drow,
            "epsilon": self.epsilon,
            "trace": list(self.trace),
        }


def decide_pose(diff: float, dcol: float, drow: float, epsilon: float) -> PoseClass:
    """The bare decision rule on non-negative deviations.

    Z wins when the eye line tilts beyond epsilon; otherwise the larger
    nose displacement picks Y (horizontal >= vertical) or X; no
    deviation at all is frontal.
    """
    if diff > epsilon:
        return PoseClass.ROTATED_Z
    if (dcol, drow) != (0, 0) and dcol >= drow:
        return PoseClass.ROTATED_Y
    if drow > dcol:
        return PoseClass.ROTATED_X
    return PoseClass.FRONTAL


def classify_pose(inp: PoseInput, config: ClassifierConfig | None = None) -> PoseReport:
    """Classify the rotated pose against the frontal reference."""
    config = config or ClassifierConfig()
    eps = config.epsilon
    eyes = inp.rotated_eyes
    diff = abs(eyes.first.row - eyes.second.row)
    dcol = abs(inp.frontal_nose.col - inp.rotated_nose.col)
    drow = abs(inp.frontal_nose.row - inp.rotated_nose.row)

    trace: list[str] = [
        f"eye rows {eyes.first.row} and {eyes.second.row}: diff = {diff}",
        f"nose cols {inp.frontal_nose.col} -> {inp.rotated_nose.col}: dcol = {dcol}",
        f"nose rows {inp.frontal_nose.row} -> {inp.rotated_nose.row}: drow = {drow}",
    ]
    if diff > eps:
        trace.append(f"diff {diff} > epsilon {eps}: rotated about Z")
        pose = PoseClass.ROTATED_Z
    else:
        trace.append(f"diff {diff} <= epsilon {eps}: not a Z rotation")
        if (dcol, drow) != (0, 0) and dcol >= drow:
            trace.append(f"dcol {dcol} >= drow {drow}: rotated about Y")
            pose = PoseClass.ROTATED_Y
        elif drow > dcol:
            trace.append(f"drow {drow} > dcol {dcol}: rotated about X")
            pose = PoseClass.ROTATED_X
        else:
            trace.append("no nose deviation: frontal")
            pose = PoseClass.FRONTAL

    return PoseReport(pose, float(diff), float(dcol), float(drow), float(eps), tuple(trace))

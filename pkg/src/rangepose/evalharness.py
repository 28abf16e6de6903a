"""Accuracy evaluation over labeled datasets, reported per axis/angle.

Every attempted sample lands in the denominator: pipeline failures
(nose or eye detection giving up) count as incorrect and are listed in
a failures appendix rather than excluded or crashed on.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import EyeCornersNotFound, ManifestError, NoseNotFound, RangePoseError
from .landmarks import EyeCorners, Landmark
from .pipeline import RunConfig, detect_pose
from .poseclassify import ClassifierConfig, PoseClass, PoseInput, classify_pose
from .synthface import LabeledSample

_AXIS_ORDER = {"x": 0, "y": 1, "z": 2}

_AXIS_CLASS = {
    "x": PoseClass.ROTATED_X,
    "y": PoseClass.ROTATED_Y,
    "z": PoseClass.ROTATED_Z,
}


@dataclass(frozen=True)
class EvalRow:
    """One (axis, angle) cell: images attempted and images correct."""

    axis: str
    angle: float
    total: int
    correct: int

    def __post_init__(self):
        if not 0 <= self.correct <= self.total:
            raise ValueError(f"need 0 <= correct <= total, got {self}")

    @property
    def rate(self) -> float:
        return 100.0 * self.correct / self.total if self.total else 0.0


@dataclass(frozen=True)
class AccuracyTable:
    rows: tuple[EvalRow, ...]
    overall_total: int
    overall_correct: int
    failures: tuple[str, ...] = ()

    def __post_init__(self):
        if self.overall_total != sum(r.total for r in self.rows) or self.overall_correct != sum(
            r.correct for r in self.rows
        ):
            raise ValueError("overall figures must equal the column sums")

    @staticmethod
    def from_rows(rows, failures=()) -> "AccuracyTable":
        rows = tuple(rows)
        return AccuracyTable(
            rows,
            sum(r.total for r in rows),
            sum(r.correct for r in rows),
            tuple(failures),
        )

    @property
    def rate(self) -> float:
        return 100.0 * self.overall_correct / self.overall_total if self.overall_total else 0.0

    def axis_summary(self) -> list[tuple[str, int, int, float]]:
        """(axis, total, correct, rate) aggregated over angles."""
        agg: dict[str, list[int]] = {}
        for r in self.rows:
            t = agg.setdefault(r.axis, [0, 0])
            t[0] += r.total
            t[1] += r.correct
        out = []
        for axis in sorted(agg, key=lambda a: _AXIS_ORDER.get(a, 99)):
            total, correct = agg[axis]
            out.append((axis, total, correct, 100.0 * correct / total if total else 0.0))
        return out


def expected_class(axis: str, angle: float) -> PoseClass:
    return PoseClass.FRONTAL if angle == 0 else _AXIS_CLASS[axis]


def _truth_landmark(image, px: tuple[int, int]) -> Landmark:
    r, c = px
    depth = float(image.depth[r, c]) if image.valid[r, c] else 0.0
    return Landmark(r, c, depth)


def _classify_from_truth(sample: LabeledSample, epsilon: float) -> PoseClass:
    lm = sample.landmarks
    e1 = _truth_landmark(sample.rotated, lm.rotated_eyes[0])
    e2 = _truth_landmark(sample.rotated, lm.rotated_eyes[1])
    eyes = EyeCorners(e1, e2, 0.0, 0.0)
    inp = PoseInput(
        frontal_nose=_truth_landmark(sample.frontal, lm.frontal_nose),
        rotated_nose=_truth_landmark(sample.rotated, lm.rotated_nose),
        rotated_eyes=eyes,
    )
    return classify_pose(inp, ClassifierConfig(epsilon)).pose


def _sample_outcome(
    sample: LabeledSample, config: RunConfig, use_true_landmarks: bool
) -> tuple[bool, str | None]:
    """(correct, failure note). Failures are incorrect by definition."""
    expected = expected_class(sample.truth.axis, sample.truth.angle_deg)
    if not sample.usable:
        return False, f"{sample.name}: unusable sample (landmarks or face off-grid)"
    if use_true_landmarks:
        return _classify_from_truth(sample, config.epsilon) == expected, None
    try:
        report, _, _ = detect_pose(sample.frontal, sample.rotated, config)
    except NoseNotFound as exc:
        return False, f"{sample.name}: nose detection failed: {exc}"
    except EyeCornersNotFound as exc:
        return False, f"{sample.name}: eye-corner detection failed: {exc}"
    except RangePoseError as exc:
        return False, f"{sample.name}: pipeline failed: {exc}"
    return report.pose == expected, None


def evaluate(
    samples: list[LabeledSample],
    config: RunConfig | None = None,
    use_true_landmarks: bool = False,
    jobs: int = 1,
) -> AccuracyTable:
    """Run the pipeline over every sample and tabulate accuracy.

    Deterministic for a fixed dataset and config: results are reduced in
    dataset order whatever the worker count, and rows are keyed by
    (axis, |angle|, sign) so sample order cannot change them.
    """
    if not samples:
        raise ValueError("evaluate needs a non-empty dataset")
    config = config or RunConfig()

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(
                pool.map(lambda s: _sample_outcome(s, config, use_true_landmarks), samples)
            )
    else:
        outcomes = [_sample_outcome(s, config, use_true_landmarks) for s in samples]

    cells: dict[tuple[str, float], list[int]] = {}
    failures: list[str] = []
    for sample, (correct, note) in zip(samples, outcomes):
        key = (sample.truth.axis, sample.truth.angle_deg)
        cell = cells.setdefault(key, [0, 0])
        cell[0] += 1
        cell[1] += int(correct)
        if note is not None:
            failures.append(note)

    def row_key(key: tuple[str, float]):
        axis, angle = key
        return (_AXIS_ORDER.get(axis, 99), abs(angle), 0 if angle >= 0 else 1)

    rows = [
        EvalRow(axis, angle, cells[(axis, angle)][0], cells[(axis, angle)][1])
        for axis, angle in sorted(cells, key=row_key)
    ]
    return AccuracyTable.from_rows(rows, sorted(failures))


def _fmt_angle(angle: float) -> str:
    return "0" if angle == 0 else f"{angle:+g}"


def render_table(table: AccuracyTable, fmt: str = "text") -> str:
    """Serialize an accuracy table as csv or axis-blocked text."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axis", "angle", "total", "correct", "rate"])
        for r in table.rows:
            w.writerow([r.axis.upper(), _fmt_angle(r.angle), r.total, r.correct, f"{r.rate:.2f}"])
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown table format {fmt!r}")

    lines: list[str] = []
    by_axis: dict[str, list[EvalRow]] = {}
    for r in table.rows:
        by_axis.setdefault(r.axis, []).append(r)
    for axis in sorted(by_axis, key=lambda a: _AXIS_ORDER.get(a, 99)):
        lines.append(f"Detection of pose alignment across {axis.upper()} axis")
        lines.append(f"{'A':>8} {'B':>6} {'C':>6}")
        for r in by_axis[axis]:
            lines.append(f"{_fmt_angle(r.angle):>8} {r.total:>6} {r.correct:>6}")
        lines.append("")
    lines.append("A = rotation angle (degrees), B = images attempted, C = detected correctly")
    lines.append(
        f"Overall: {table.overall_total} images, {table.overall_correct} correct, "
        f"{table.rate:.2f}%"
    )
    if table.failures:
        lines.append("")
        lines.append(f"Failures ({len(table.failures)}):")
        lines.extend(f"  {f}" for f in table.failures)
    return "\n".join(lines) + "\n"


def summary_dict(table: AccuracyTable) -> dict:
    """Machine-readable summary: counts, rate, and the failure list."""
    return {
        "overall_total": table.overall_total,
        "overall_correct": table.overall_correct,
        "rate_percent": round(table.rate, 2),
        "rows": [
            {"axis": r.axis, "angle": r.angle, "total": r.total, "correct": r.correct}
            for r in table.rows
        ],
        "failures": list(table.failures),
    }


def parse_table_csv(text: str) -> AccuracyTable:
    """Inverse of render_table(fmt='csv'); the rate column is derived,
    so only counts are read back."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["axis", "angle", "total", "correct", "rate"]:
        raise ValueError(f"unexpected csv header {header!r}")
    rows = [
        EvalRow(rec[0].lower(), float(rec[1]), int(rec[2]), int(rec[3]))
        for rec in reader
        if rec
    ]
    return AccuracyTable.from_rows(rows)


def read_counts_csv(path) -> tuple[list[EvalRow], tuple[int, int] | None]:
    """Read a prebuilt counts file: axis,angle,total,correct rows with an
    optional trailing ``overall`` row carrying externally audited totals.

    An explicit overall row takes precedence over column sums when the
    two disagree (published summaries sometimes do).
    """
    rows: list[EvalRow] = []
    overall: tuple[int, int] | None = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, rec in enumerate(reader, start=1):
            if not rec or rec[0].strip().startswith("#"):
                continue
            tag = rec[0].strip().lower()
            if lineno == 1 and tag == "axis":
                continue
            try:
                if tag == "overall":
                    overall = (int(rec[2]), int(rec[3]))
                else:
                    rows.append(EvalRow(tag, float(rec[1]), int(rec[2]), int(rec[3])))
            except (IndexError, ValueError) as exc:
                raise ManifestError(f"{path}: bad counts row {rec!r} (line {lineno})") from exc
    return rows, overall


def counts_summary(path) -> tuple[str, float]:
    """Render a counts file in the axis-table layout plus the overall rate."""
    rows, overall = read_counts_csv(path)
    if overall is None:
        table = AccuracyTable.from_rows(rows)
        return render_table(table, "text"), table.rate

    total, correct = overall
    if total <= 0 or not 0 <= correct <= total:
        raise ManifestError(f"{path}: invalid overall counts {overall}")
    rate = 100.0 * correct / total
    body = ""
    if rows:
        body = render_table(AccuracyTable.from_rows(rows), "text")
        body = body[: body.rindex("Overall:")]
    text = body + f"Overall: {total} images, {correct} correct, {rate:.2f}%\n"
    return text, rate

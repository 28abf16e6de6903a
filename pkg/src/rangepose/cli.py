"""Command-line interface: detect, landmarks, synth, eval.

Exit status is a contract: 0 = verdict or success, 2 = input or
environment error, 3 = pipeline failure (a detection stage gave up).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .errors import (
    EyeCornersNotFound,
    FormatError,
    ManifestError,
    NoseNotFound,
    RangePoseError,
)
from .evalharness import counts_summary, evaluate, render_table, summary_dict
from .landmarks import EyeRoiSpec, format_corner
from .pipeline import ImageLandmarks, RunConfig, detect_pose, extract_landmarks
from .preprocess import CropSpec, SmoothSpec
from .rangeio import load_depth_grid
from .synthface import (
    AXES,
    default_sweep,
    make_dataset,
    read_dataset,
    subject_specs,
    write_dataset,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PIPELINE = 3


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline configuration")
    g.add_argument("--config", help="JSON file with the same keys as the flags below")
    g.add_argument("--crop", nargs=4, type=int, metavar=("R0", "R1", "C0", "C1"),
                   help="crop rows [R0,R1) and cols [C0,C1) before processing")
    g.add_argument("--sigma", type=float, help="Gaussian smoothing sigma in pixels")
    g.add_argument("--kernel-radius", type=int, help="Gaussian kernel radius in pixels")
    g.add_argument("--epsilon", type=float, help="eye-line tolerance in pixels")
    g.add_argument("--fit-window", type=int, help="curvature fit window (odd, >= 5)")
    g.add_argument("--pixel-pitch", type=float, help="pixel pitch in mm/px")
    g.add_argument("--roi-above-min", type=int, help="eye band lower offset above the nose")
    g.add_argument("--roi-above-max", type=int, help="eye band upper offset above the nose")
    g.add_argument("--nms-radius", type=float, help="corner suppression radius in pixels")
    g.add_argument("--score-mode", choices=("mean", "gaussian", "principal"),
                   help="curvature score used to rank eye corners")


_CONFIG_KEYS = (
    "crop", "sigma", "kernel_radius", "epsilon", "fit_window",
    "pixel_pitch", "roi_above_min", "roi_above_max", "nms_radius", "score_mode",
)


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        for key in _CONFIG_KEYS:
            if key in file_cfg:
                values[key] = file_cfg[key]
    for key in _CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v

    base = RunConfig()
    crop = CropSpec(*values["crop"]) if values.get("crop") else None
    smooth = SmoothSpec(
        sigma=values.get("sigma", base.smooth.sigma),
        kernel_radius=values.get("kernel_radius", base.smooth.kernel_radius),
    )
    roi = EyeRoiSpec(
        above_min=values.get("roi_above_min", base.eye_roi.above_min),
        above_max=values.get("roi_above_max", base.eye_roi.above_max),
        suppression_radius=values.get("nms_radius", base.eye_roi.suppression_radius),
        score_mode=values.get("score_mode", base.eye_roi.score_mode),
    )
    return RunConfig(
        crop=crop,
        smooth=smooth,
        epsilon=values.get("epsilon", base.epsilon),
        fit_window=values.get("fit_window", base.fit_window),
        pixel_pitch=values.get("pixel_pitch", base.pixel_pitch),
        eye_roi=roi,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rangepose",
        description="Face pose-orientation detection from range images",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="classify a rotated image against a frontal reference")
    p.add_argument("frontal", help="frontal-pose depth grid (csv or pgm16)")
    p.add_argument("rotated", help="probe depth grid")
    p.add_argument("--format", choices=("text", "json"), default="text")
    _add_config_flags(p)

    p = sub.add_parser("landmarks", help="report nose tip and eye corners of one image")
    p.add_argument("image", help="depth grid (csv or pgm16)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    _add_config_flags(p)

    p = sub.add_parser("synth", help="generate a labeled synthetic dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--subjects", type=int, default=10)
    p.add_argument("--angles", default="5,-5,10,-10,18,-18,40,-40",
                   help="comma-separated signed degrees")
    p.add_argument("--axes", default="x,y,z", help="comma-separated subset of x,y,z")
    p.add_argument("--noise", type=float, default=0.0, help="depth noise sigma in mm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-format", choices=("csv", "pgm16"), default="csv")

    p = sub.add_parser("eval", help="evaluate the pipeline over a dataset")
    p.add_argument("--dataset", help="dataset directory with a manifest")
    p.add_argument("--counts", help="prebuilt counts csv to summarize instead of running")
    p.add_argument("--out-dir", help="directory for report.csv and report.txt")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--use-true-landmarks", action="store_true",
                   help="feed ground-truth landmarks to the classifier (oracle mode)")
    _add_config_flags(p)

    return parser


def _load_image(path: str):
    try:
        return load_depth_grid(path)
    except (FormatError, OSError, ValueError) as exc:
        print(f"error: cannot load {path}: {exc}", file=sys.stderr)
        return None


def _landmark_lines(tag: str, lm: ImageLandmarks) -> list[str]:
    lines = [f"{tag} nose tip: row {lm.nose.row} col {lm.nose.col} depth {lm.nose.depth:.3f}"]
    lines.append(f"{tag} eye corners (Row Col Curvature):")
    for row, col, score in lm.eyes.as_rows():
        lines.append(f"  {format_corner(row, col, score)}")
    return lines


def _landmarks_dict(lm: ImageLandmarks) -> dict:
    return {
        "nose": asdict(lm.nose),
        "eyes": [
            {"row": r, "col": c, "curvature": s} for r, c, s in lm.eyes.as_rows()
        ],
    }


def cmd_detect(args: argparse.Namespace) -> int:
    frontal = _load_image(args.frontal)
    rotated = _load_image(args.rotated)
    if frontal is None or rotated is None:
        return EXIT_INPUT
    config = build_config(args)
    try:
        report, front_lm, rot_lm = detect_pose(frontal, rotated, config)
    except NoseNotFound as exc:
        print(f"error: nose not found: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except EyeCornersNotFound as exc:
        print(f"error: eye corners not found: {exc}", file=sys.stderr)
        return EXIT_PIPELINE

    if args.format == "json":
        payload = report.to_dict()
        payload["frontal"] = _landmarks_dict(front_lm)
        payload["rotated"] = _landmarks_dict(rot_lm)
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(f"pose: {report.pose}")
        print(
            f"eye_line_diff: {report.eye_line_diff:g}  nose_dcol: {report.nose_dcol:g}  "
            f"nose_drow: {report.nose_drow:g}  epsilon: {report.epsilon:g}"
        )
        for line in _landmark_lines("frontal", front_lm) + _landmark_lines("rotated", rot_lm):
            print(line)
        print("trace:")
        for step in report.trace:
            print(f"  {step}")
    return EXIT_OK


def cmd_landmarks(args: argparse.Namespace) -> int:
    image = _load_image(args.image)
    if image is None:
        return EXIT_INPUT
    config = build_config(args)
    try:
        lm = extract_landmarks(image, config)
    except NoseNotFound as exc:
        print(f"error: nose not found: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except EyeCornersNotFound as exc:
        print(f"error: eye corners not found: {exc}", file=sys.stderr)
        return EXIT_PIPELINE

    if args.format == "json":
        print(json.dumps(_landmarks_dict(lm), indent=2, sort_keys=True))
    else:
        print(f"nose tip: row {lm.nose.row} col {lm.nose.col} depth {lm.nose.depth:.3f}")
        print("Row Col Curvature")
        for row, col, score in lm.eyes.as_rows():
            print(format_corner(row, col, score))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        angles = [float(a) for a in args.angles.split(",") if a.strip()]
        axes = tuple(a.strip().lower() for a in args.axes.split(",") if a.strip())
    except ValueError as exc:
        print(f"error: bad angle list: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if not angles or not axes or any(a not in AXES for a in axes):
        print(f"error: axes must be a subset of {AXES} and angles non-empty", file=sys.stderr)
        return EXIT_INPUT

    specs = subject_specs(args.subjects, seed=args.seed)
    if args.noise > 0:
        specs = [replace(s, noise_sigma=args.noise) for s in specs]
    sweep = default_sweep(angles, axes)
    samples = make_dataset(specs, sweep)
    try:
        out = write_dataset(samples, args.out, args.grid_format)
    except OSError as exc:
        print(f"error: cannot write dataset to {args.out}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"wrote {len(samples)} samples to {out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    if args.counts:
        try:
            text, rate = counts_summary(args.counts)
        except (ManifestError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        print(text, end="")
        return EXIT_OK

    if not args.dataset:
        print("error: provide --dataset or --counts", file=sys.stderr)
        return EXIT_INPUT
    try:
        samples = read_dataset(args.dataset)
    except (ManifestError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if not samples:
        print("error: dataset is empty", file=sys.stderr)
        return EXIT_INPUT

    config = build_config(args)
    table = evaluate(
        samples, config, use_true_landmarks=args.use_true_landmarks, jobs=args.jobs
    )
    if args.out_dir:
        out = Path(args.out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "report.csv").write_text(render_table(table, "csv"))
            (out / "report.txt").write_text(render_table(table, "text"))
            (out / "report.json").write_text(
                json.dumps(summary_dict(table), indent=2, sort_keys=True) + "\n"
            )
        except OSError as exc:
            print(f"error: cannot write reports: {exc}", file=sys.stderr)
            return EXIT_INPUT
    print(
        f"Overall: {table.overall_total} images, {table.overall_correct} correct, "
        f"{table.rate:.2f}%"
    )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "detect": cmd_detect,
        "landmarks": cmd_landmarks,
        "synth": cmd_synth,
        "eval": cmd_eval,
    }
    try:
        return handlers[args.command](args)
    except RangePoseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the lines live.
Criteria carry runtime budgets; each test measures its own wall time.
"""

from __future__ import annotations

import hashlib
import re
import time
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import numpy as np

from rangepose.cli import main as cli_main
from rangepose.evalharness import counts_summary, evaluate
from rangepose.landmarks import curvature_map, detect_nose_tip
from rangepose.pipeline import RunConfig, extract_landmarks
from rangepose.poseclassify import ClassifierConfig, PoseClass, classify_pose, decide_pose
from rangepose.preprocess import otsu_threshold
from rangepose.rangeio import GridSpec, RangeImage
from rangepose.synthface import (
    SyntheticFaceSpec,
    default_sweep,
    generate_face,
    make_dataset,
    render_scene,
    subject_specs,
)

from conftest import DATA_DIR, random_image
from oracles import nose_bruteforce, otsu_bruteforce
from test_poseclassify import make_input, random_case

REPO_ROOT = Path(__file__).parent.parent


@contextmanager
def criterion(num: int, desc: str, limit_s: float):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"\n[FAIL] criterion {num}: {desc}")
        raise
    elapsed = time.perf_counter() - t0
    assert elapsed < limit_s, f"criterion {num} took {elapsed:.2f}s, budget {limit_s}s"
    print(f"\n[PASS] criterion {num}: {desc} ({elapsed:.2f}s < {limit_s:g}s)")


def test_criterion_1_counts_reproduction():
    with criterion(1, "prebuilt 848/566 counts render at 66.75% in A-B-C layout", 1.0):
        text, rate = counts_summary(DATA_DIR / "reference_counts.csv")
        assert f"{rate:.2f}" == "66.75"
        assert "Overall: 848 images, 566 correct, 66.75%" in text
        for axis in "XYZ":
            assert f"Detection of pose alignment across {axis} axis" in text
        assert re.search(r"\bA\b\s+\bB\b\s+\bC\b", text)


def test_criterion_2_otsu_oracle_equivalence():
    with criterion(2, "otsu matches exhaustive 256-threshold search on 100 histograms", 5.0):
        rng = np.random.default_rng(7)
        for trial in range(100):
            n = int(rng.integers(30, 500))
            if trial % 3 == 0:
                depths = rng.uniform(0, 255, n)
            elif trial % 3 == 1:
                depths = np.concatenate(
                    [rng.normal(40, 6, n // 2), rng.normal(180, 25, n - n // 2)]
                )
            else:
                depths = rng.exponential(30.0, n)
            side = max(int(np.ceil(np.sqrt(n))), 3)
            depth = np.zeros((side, side))
            valid = np.zeros((side, side), dtype=bool)
            depth.flat[:n] = depths
            valid.flat[:n] = True
            img = RangeImage(depth, valid)
            got = otsu_threshold(img)
            _, expected = otsu_bruteforce(img.depth[img.valid])
            assert got.threshold == expected, f"histogram {trial}"


def test_criterion_3_nose_oracle_equivalence():
    with criterion(3, "nose tip matches brute-force 3x3 window enumeration on 50 grids", 5.0):
        rng = np.random.default_rng(11)
        for i in range(50):
            img = random_image(rng, 60, 60, invalid_frac=0.1 if i % 2 else 0.0)
            expected = nose_bruteforce(img)
            assert expected is not None
            got = detect_nose_tip(img)
            assert (got.row, got.col) == expected, f"grid {i}"


def test_criterion_4_curvature_fixtures():
    with criterion(4, "curvature fixtures: plane flat, paraboloid unit, sphere K=1/R^2", 10.0):
        u = (np.arange(21) - 10) * 1.0
        U, V = np.meshgrid(u, u)
        plane = RangeImage(0.3 * U + 0.1 * V, np.ones((21, 21), dtype=bool))
        cm = curvature_map(plane, 7, 1.0)
        assert np.nanmax(np.abs(cm.mean)) <= 1e-9
        assert np.nanmax(np.abs(cm.gauss)) <= 1e-9

        pitch = 0.05
        u = (np.arange(41) - 20) * pitch
        U, V = np.meshgrid(u, u)
        para = RangeImage(-(U**2 + V**2) / 2, np.ones((41, 41), dtype=bool))
        cm = curvature_map(para, 7, pitch)
        assert abs(abs(cm.mean[20, 20]) - 1.0) <= 0.01
        assert abs(cm.gauss[20, 20] - 1.0) <= 0.01

        R, pitch = 10.0, 0.2
        u = (np.arange(41) - 20) * pitch
        U, V = np.meshgrid(u, u)
        sphere = RangeImage(np.sqrt(R**2 - U**2 - V**2), np.ones((41, 41), dtype=bool))
        cm = curvature_map(sphere, 7, pitch)
        K = cm.gauss[cm.defined]
        assert K.size > 0
        assert np.max(np.abs(K - 0.01)) <= 0.02 * 0.01


def test_criterion_5_synthetic_sweep_accuracy():
    with criterion(
        5, "240-sample sweep: noiseless >= 90%, 1% noise >= 70%, degradation table", 120.0
    ):
        specs = subject_specs(10, seed=42)
        sweep = default_sweep()
        clean = evaluate(make_dataset(specs, sweep))
        noisy_specs = [replace(s, noise_sigma=0.01 * s.depth_range) for s in specs]
        noisy = evaluate(make_dataset(noisy_specs, sweep))

        assert clean.overall_total == 240
        assert clean.rate >= 90.0, f"noiseless rate {clean.rate:.2f}% below 90%"
        assert noisy.rate >= 70.0, f"noisy rate {noisy.rate:.2f}% below 70%"

        # per-axis degradation table, emitted as part of the gate
        ca = {a: r for a, _, _, r in clean.axis_summary()}
        na = {a: r for a, _, _, r in noisy.axis_summary()}
        print("\naxis  noiseless  noisy  degradation")
        for axis in "xyz":
            print(f"{axis:>4}  {ca[axis]:>8.2f}%  {na[axis]:>5.2f}%  {ca[axis]-na[axis]:+.2f}")

        # the achieved rates were recorded by an oracle run before the
        # thresholds were frozen; the record must match this run
        results = (REPO_ROOT / "RESULTS.md").read_text()
        assert f"{clean.rate:.2f}%" in results, "recorded noiseless rate is stale"
        assert f"{noisy.rate:.2f}%" in results, "recorded noisy rate is stale"


def test_criterion_6_classifier_property_suite():
    with criterion(6, "classifier properties over 1000 randomized configurations", 10.0):
        rng = np.random.default_rng(13)
        for _ in range(1000):
            f, r, er, ec, eps = random_case(rng)
            inp = make_input(f, r, er, ec)
            report = classify_pose(inp, ClassifierConfig(eps))

            # exhaustiveness, exclusivity, replayability
            assert report.pose in PoseClass
            assert (
                decide_pose(
                    report.eye_line_diff, report.nose_dcol, report.nose_drow, report.epsilon
                )
                is report.pose
            )
            # epsilon monotonicity
            if report.pose is PoseClass.ROTATED_Z and eps > 0:
                assert (
                    classify_pose(inp, ClassifierConfig(eps / 2)).pose is PoseClass.ROTATED_Z
                )
            # translation invariance
            dr, dc = int(rng.integers(-15, 15)), int(rng.integers(-15, 15))
            shifted = make_input(
                (f[0] + dr, f[1] + dc),
                (r[0] + dr, r[1] + dc),
                (er[0] + dr, er[1] + dr),
                (ec[0] + dc, ec[1] + dc),
            )
            assert classify_pose(shifted, ClassifierConfig(eps)).pose is report.pose
            # eye swap symmetry
            swapped = make_input(f, r, (er[1], er[0]), (ec[1], ec[0]))
            assert classify_pose(swapped, ClassifierConfig(eps)).pose is report.pose
        # tie rule, directly
        for d in (1, 2, 7, 19):
            tie = make_input((50, 50), (50 + d, 50 + d))
            assert classify_pose(tie).pose is PoseClass.ROTATED_Y


def _tree_digest(root: Path) -> str:
    digest = hashlib.sha256()
    for f in sorted(root.rglob("*")):
        if f.is_file():
            digest.update(str(f.relative_to(root)).encode())
            digest.update(f.read_bytes())
    return digest.hexdigest()


def test_criterion_7_determinism(tmp_path, capsys):
    with criterion(7, "synth and eval are byte-identical across reruns and parallelism", 120.0):
        synth_args = [
            "synth", "--subjects", "2", "--angles", "5,-5", "--axes", "x,y,z",
            "--noise", "0.4", "--seed", "99",
        ]
        assert cli_main(synth_args + ["--out", str(tmp_path / "a")]) == 0
        assert cli_main(synth_args + ["--out", str(tmp_path / "b")]) == 0
        assert _tree_digest(tmp_path / "a") == _tree_digest(tmp_path / "b")

        reports = []
        for name, jobs in [("r1", "1"), ("r2", "1"), ("r4", "4")]:
            rc = cli_main(
                ["eval", "--dataset", str(tmp_path / "a"),
                 "--out-dir", str(tmp_path / name), "--jobs", jobs]
            )
            assert rc == 0
            reports.append(_tree_digest(tmp_path / name))
        capsys.readouterr()
        assert reports[0] == reports[1] == reports[2]


def test_criterion_8_complexity_smoke():
    with criterion(8, "pipeline < 100 ms at 100x100; 200x200 within 8x", 60.0):
        spec100 = SyntheticFaceSpec()
        big_grid = GridSpec(200, 200, (-50.0, 50.0), (-50.0, 50.0))
        spec200 = replace(spec100, grid=big_grid)
        img100 = render_scene(generate_face(spec100), spec100)
        img200 = render_scene(generate_face(spec200), spec200)
        cfg100 = RunConfig()
        cfg200 = RunConfig(pixel_pitch=0.5)

        def best_time(image, cfg, repeats=5):
            extract_landmarks(image, cfg)  # warm-up
            best = np.inf
            for _ in range(repeats):
                t0 = time.perf_counter()
                extract_landmarks(image, cfg)
                best = min(best, time.perf_counter() - t0)
            return best

        t100 = best_time(img100, cfg100)
        t200 = best_time(img200, cfg200)
        print(f"\npipeline 100x100: {t100*1000:.1f} ms, 200x200: {t200*1000:.1f} ms "
              f"(ratio {t200/t100:.2f}x)")
        assert t100 < 0.100, f"100x100 pipeline took {t100*1000:.1f} ms"
        assert t200 <= 8 * t100, f"grid 2x -> runtime {t200/t100:.1f}x exceeds 8x"

from __future__ import annotations

import numpy as np
import pytest

from rangepose.errors import EyeCornersNotFound, NoseNotFound
from rangepose.landmarks import (
    EyeRoiSpec,
    Landmark,
    curvature_map,
    detect_eye_corners,
    detect_nose_tip,
    format_corner,
)
from rangepose.rangeio import RangeImage

from conftest import random_image
from oracles import nose_bruteforce


def bump_image(height, width, centers, amplitude=10.0, sigma=3.0, base=1.0):
    r = np.arange(height)[:, None]
    c = np.arange(width)[None, :]
    depth = np.full((height, width), base)
    for cr, cc in centers:
        depth = depth + amplitude * np.exp(-((r - cr) ** 2 + (c - cc) ** 2) / (2 * sigma**2))
    return RangeImage(depth, np.ones((height, width), dtype=bool))


class TestNoseTip:
    def test_single_bump(self):
        img = bump_image(41, 61, [(20, 30)])
        lm = detect_nose_tip(img)
        assert (lm.row, lm.col) == (20, 30)
        assert lm.depth == img.depth[20, 30]

    def test_row_major_tie_break_on_identical_bumps(self):
        img = bump_image(41, 41, [(10, 10), (30, 30)])
        lm = detect_nose_tip(img)
        assert (lm.row, lm.col) == (10, 10)

    def test_matches_bruteforce_on_50_random_grids(self, rng):
        for i in range(50):
            img = random_image(rng, 20, 20, invalid_frac=0.15 if i % 2 else 0.0)
            expected = nose_bruteforce(img)
            if expected is None:
                with pytest.raises(NoseNotFound):
                    detect_nose_tip(img)
                continue
            lm = detect_nose_tip(img)
            assert (lm.row, lm.col) == expected, f"grid {i}"

    def test_constant_image_has_no_nose(self):
        img = RangeImage(np.full((9, 9), 4.0), np.ones((9, 9), dtype=bool))
        with pytest.raises(NoseNotFound):
            detect_nose_tip(img)

    def test_no_valid_window_raises(self):
        valid = np.zeros((5, 5), dtype=bool)
        valid[::2, ::2] = True  # checkerboard-ish, no full 3x3 block
        img = RangeImage(np.ones((5, 5)), valid)
        with pytest.raises(NoseNotFound):
            detect_nose_tip(img)

    def test_translation_invariance(self, rng):
        img = random_image(rng, 15, 15)
        a = detect_nose_tip(img)
        shifted = RangeImage(img.depth + 123.456, img.valid)
        b = detect_nose_tip(shifted)
        assert (a.row, a.col) == (b.row, b.col)

    def test_positive_scaling_invariance(self, rng):
        img = random_image(rng, 15, 15)
        a = detect_nose_tip(img)
        scaled = RangeImage(img.depth * 7.25, img.valid)
        b = detect_nose_tip(scaled)
        assert (a.row, a.col) == (b.row, b.col)


class TestCurvatureMap:
    def grid(self, n, pitch):
        u = (np.arange(n) - n // 2) * pitch
        return np.meshgrid(u, u)

    def test_inclined_plane_is_flat(self):
        U, V = self.grid(21, 1.0)
        img = RangeImage(0.3 * U + 0.1 * V, np.ones((21, 21), dtype=bool))
        cm = curvature_map(img, 7, 1.0)
        assert np.nanmax(np.abs(cm.mean)) <= 1e-9
        assert np.nanmax(np.abs(cm.gauss)) <= 1e-9

    def test_paraboloid_apex_unit_curvatures(self):
        pitch = 0.05
        U, V = self.grid(41, pitch)
        img = RangeImage(-(U**2 + V**2) / 2.0, np.ones((41, 41), dtype=bool))
        cm = curvature_map(img, 7, pitch)
        c = 20
        assert abs(abs(cm.mean[c, c]) - 1.0) <= 0.01
        assert abs(cm.gauss[c, c] - 1.0) <= 0.01

    def test_sphere_patch_gaussian_curvature(self):
        # derived: K of a radius-10 sphere is 0.01 everywhere on the patch
        R, pitch = 10.0, 0.2
        U, V = self.grid(41, pitch)
        img = RangeImage(np.sqrt(R**2 - U**2 - V**2), np.ones((41, 41), dtype=bool))
        cm = curvature_map(img, 7, pitch)
        K = cm.gauss[cm.defined]
        assert K.size > 0
        assert np.max(np.abs(K - 1.0 / R**2)) <= 0.02 * (1.0 / R**2)

    def test_depth_translation_invariance(self, rng):
        img = random_image(rng, 15, 15)
        a = curvature_map(img, 5, 1.0)
        b = curvature_map(RangeImage(img.depth + 55.0, img.valid), 5, 1.0)
        assert np.allclose(a.mean, b.mean, atol=1e-9, equal_nan=True)
        assert np.allclose(a.gauss, b.gauss, atol=1e-9, equal_nan=True)

    def test_principal_curvatures_consistent_with_h_and_k(self, rng):
        img = random_image(rng, 15, 15)
        cm = curvature_map(img, 5, 1.0)
        d = cm.defined
        assert np.all(np.abs(cm.k1[d] * cm.k2[d] - cm.gauss[d]) <= 1e-6 * (1 + np.abs(cm.gauss[d])))
        assert np.all(
            np.abs((cm.k1[d] + cm.k2[d]) / 2 - cm.mean[d]) <= 1e-6 * (1 + np.abs(cm.mean[d]))
        )
        assert np.all(cm.k1[d] >= cm.k2[d])

    def test_mirror_symmetry(self, rng):
        img = random_image(rng, 15, 15)
        cm = curvature_map(img, 5, 1.0)
        mirrored = RangeImage(img.depth[:, ::-1], img.valid[:, ::-1])
        cm2 = curvature_map(mirrored, 5, 1.0)
        assert np.allclose(cm.mean, cm2.mean[:, ::-1], atol=1e-9, equal_nan=True)
        assert np.allclose(cm.gauss, cm2.gauss[:, ::-1], atol=1e-9, equal_nan=True)

    def test_undefined_near_border_and_holes(self):
        valid = np.ones((15, 15), dtype=bool)
        valid[7, 7] = False
        img = RangeImage(np.ones((15, 15)), valid)
        cm = curvature_map(img, 5, 1.0)
        assert not cm.defined[:2, :].any()
        assert not cm.defined[:, -2:].any()
        # every pixel whose 5x5 window reaches the hole is undefined
        assert not cm.defined[5:10, 5:10].any()
        assert cm.defined[4, 4]
        assert np.isnan(cm.mean[7, 7])

    def test_rejects_bad_window(self, rng):
        img = random_image(rng, 10, 10)
        with pytest.raises(ValueError):
            curvature_map(img, 4, 1.0)
        with pytest.raises(ValueError):
            curvature_map(img, 3, 1.0)


def dent_image(height=50, width=60, dents=((18, 20), (18, 40)), depth=6.0, sigma=2.0):
    """Flat slab with sharp circular dents; nose bump low in the frame."""
    r = np.arange(height)[:, None]
    c = np.arange(width)[None, :]
    z = np.full((height, width), 30.0)
    for dr, dc in dents:
        z = z - depth * np.exp(-((r - dr) ** 2 + (c - dc) ** 2) / (2 * sigma**2))
    z = z + 8.0 * np.exp(-((r - 42) ** 2 + (c - 30) ** 2) / (2 * 4.0**2))
    return RangeImage(z, np.ones((height, width), dtype=bool))


class TestEyeCorners:
    def test_two_dents_found_exactly(self):
        img = dent_image()
        nose = detect_nose_tip(img)
        assert (nose.row, nose.col) == (42, 30)
        cm = curvature_map(img, 7, 1.0)
        corners = detect_eye_corners(img, cm, nose, EyeRoiSpec(5, 35, 8.0))
        assert (corners.first.row, corners.first.col) == (18, 20)
        assert (corners.second.row, corners.second.col) == (18, 40)
        assert corners.first.col <= corners.second.col

    def test_pit_centers_within_2px(self):
        # generator-parameter oracle: pits at (18, 20) and (18, 40)
        img = dent_image(sigma=3.5, depth=5.0)
        nose = detect_nose_tip(img)
        cm = curvature_map(img, 7, 1.0)
        corners = detect_eye_corners(img, cm, nose, EyeRoiSpec(5, 35, 8.0))
        for got, want in zip(corners.as_rows(), [(18, 20), (18, 40)]):
            assert abs(got[0] - want[0]) <= 2
            assert abs(got[1] - want[1]) <= 2

    def test_scores_dominate_everything_outside_suppression_disks(self, rng):
        img = dent_image(sigma=3.0)
        noise = rng.normal(0, 0.05, img.depth.shape)
        img = RangeImage(img.depth + noise, img.valid)
        nose = detect_nose_tip(img)
        cm = curvature_map(img, 7, 1.0)
        roi = EyeRoiSpec(5, 35, 8.0)
        corners = detect_eye_corners(img, cm, nose, roi)
        score = cm.score(roi.score_mode)
        lo = max(nose.row - roi.above_max, 0)
        hi = min(nose.row - roi.above_min + 1, img.height)
        worst = min(corners.first_score, corners.second_score)
        for r in range(lo, hi):
            for c in range(img.width):
                if not cm.defined[r, c]:
                    continue
                d1 = (r - corners.first.row) ** 2 + (c - corners.first.col) ** 2
                d2 = (r - corners.second.row) ** 2 + (c - corners.second.col) ** 2
                if d1 >= roi.suppression_radius**2 and d2 >= roi.suppression_radius**2:
                    assert score[r, c] <= worst + 1e-12

    def test_corners_separated_by_suppression_radius(self):
        img = dent_image()
        nose = detect_nose_tip(img)
        cm = curvature_map(img, 7, 1.0)
        roi = EyeRoiSpec(5, 35, 8.0)
        corners = detect_eye_corners(img, cm, nose, roi)
        dist = np.hypot(
            corners.first.row - corners.second.row, corners.first.col - corners.second.col
        )
        assert dist >= roi.suppression_radius

    def test_flat_surface_has_no_corners(self):
        img = RangeImage(np.full((50, 60), 10.0), np.ones((50, 60), dtype=bool))
        nose = Landmark(42, 30, 10.0)
        cm = curvature_map(img, 7, 1.0)
        with pytest.raises(EyeCornersNotFound):
            detect_eye_corners(img, cm, nose, EyeRoiSpec(5, 35, 8.0))

    def test_band_outside_image_raises(self):
        img = dent_image()
        cm = curvature_map(img, 7, 1.0)
        with pytest.raises(EyeCornersNotFound):
            detect_eye_corners(img, cm, Landmark(2, 30, 0.0), EyeRoiSpec(5, 35, 8.0))


def test_corner_report_format():
    assert format_corner(51, 29, 0.00041) == "51 29 0.000410"
    assert format_corner(43, 18, 0.000184) == "43 18 0.000184"

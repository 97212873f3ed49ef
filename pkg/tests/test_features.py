"""Tests for the four cascade features."""

import math
import random

import numpy as np
import pytest

from speakersub.features import (
    CorpusStats,
    FrameGeometry,
    SyncWindow,
    TrackletTooShort,
    WindowOutOfRange,
    av_synchrony,
    center_contribution,
    grid_msd,
    length_consistency,
    lip_motion_msd,
    motion_region,
    mouth_region,
    msd_over_grids,
    sample_grid,
    visual_motion_signal,
)
from speakersub.media_ingest import BBox, DetectionRecord, frame_from_gray
from speakersub.tracking import Tracklet


def det(frame, face, landmarks=None):
    return DetectionRecord(frame_index=frame, face=face, landmarks=landmarks, confidence=1.0)


def track(records, tid=0):
    return Tracklet(id=tid, records=list(records))


def gray_frames(values, w=64, h=48):
    """One flat gray frame per value."""
    return [frame_from_gray(i, np.full((h, w), v, np.uint8)) for i, v in enumerate(values)]


class TestMouthRegion:
    def test_from_corners(self):
        face = BBox(80, 160, 80, 60)
        rect = mouth_region(det(0, face, ((100.0, 200.0), (140.0, 200.0))))
        assert (rect.x, rect.y, rect.w, rect.h) == (90, 182, 60, 36)

    def test_lower_third_without_landmarks(self):
        rect = mouth_region(det(0, BBox(0, 0, 30, 90)))
        assert (rect.x, rect.y, rect.w, rect.h) == (0, 60, 30, 30)

    def test_coincident_corners_fall_back(self):
        face = BBox(0, 0, 30, 90)
        rect = mouth_region(det(0, face, ((15.0, 70.0), (15.0, 70.0))))
        assert (rect.x, rect.y, rect.w, rect.h) == (0, 60, 30, 30)

    def test_rect_inside_face_expansion(self):
        rng = random.Random(0)
        for _ in range(200):
            face = BBox(rng.uniform(0, 100), rng.uniform(0, 100),
                        rng.uniform(20, 80), rng.uniform(20, 80))
            lx = rng.uniform(face.x, face.right)
            rx = rng.uniform(face.x, face.right)
            y = rng.uniform(face.y + face.h / 2, face.bottom)
            rect = mouth_region(det(0, face, ((lx, y), (rx, y))))
            bounds = face.expanded(1.2)
            assert rect.x >= bounds.x - 1e-9
            assert rect.right <= bounds.right + 1e-9
            assert rect.y >= bounds.y - 1e-9
            assert rect.bottom <= bounds.bottom + 1e-9


class TestLipMotion:
    def test_identical_frames_zero(self):
        frames = gray_frames([77, 77, 77])
        t = track([det(i, BBox(10, 10, 20, 20)) for i in range(3)])
        assert lip_motion_msd(t, frames) == 0.0

    def test_step_of_ten_gives_hundred(self):
        frames = gray_frames([0, 10])
        t = track([det(i, BBox(10, 10, 20, 20)) for i in range(2)])
        assert lip_motion_msd(t, frames) == pytest.approx(100.0)

    def test_average_over_pairs(self):
        # flat frames 0 -> 10 -> 5 give pairwise MSDs 100 and 25
        frames = gray_frames([0, 10, 5])
        t = track([det(i, BBox(10, 10, 20, 20)) for i in range(3)])
        assert lip_motion_msd(t, frames) == pytest.approx((100.0 + 25.0) / 2)

    def test_msd_over_grids_worked_example(self):
        a = np.zeros((8, 16))
        b = np.full((8, 16), 10.0)
        c = np.full((8, 16), 10.0 + math.sqrt(50.0))
        assert grid_msd(a, b) == pytest.approx(100.0)
        assert msd_over_grids([a, b, c], 3) == pytest.approx((100.0 + 50.0) / 2)

    def test_too_short(self):
        frames = gray_frames([0])
        with pytest.raises(TrackletTooShort):
            lip_motion_msd(track([det(0, BBox(0, 0, 5, 5))]), frames)

    def test_constant_shift_invariance(self):
        rng = np.random.default_rng(1)
        base = rng.integers(0, 200, (48, 64), dtype=np.uint8)
        nxt = rng.integers(0, 200, (48, 64), dtype=np.uint8)
        frames_a = [frame_from_gray(0, base), frame_from_gray(1, nxt)]
        frames_b = [frame_from_gray(0, base + 50), frame_from_gray(1, nxt + 50)]
        t = track([det(0, BBox(8, 8, 30, 30)), det(1, BBox(8, 8, 30, 30))])
        assert lip_motion_msd(t, frames_a) == pytest.approx(lip_motion_msd(t, frames_b))

    def test_sample_grid_shape_and_means(self):
        gray = np.zeros((48, 64), np.uint8)
        gray[:24] = 100  # top half bright
        grid = sample_grid(gray, BBox(0, 0, 64, 48))
        assert grid.shape == (8, 16)
        assert np.allclose(grid[:4], 100.0)
        assert np.allclose(grid[4:], 0.0)

    def test_sample_grid_tiny_region(self):
        gray = np.full((10, 10), 42, np.uint8)
        grid = sample_grid(gray, BBox(4, 4, 2, 2))
        assert grid.shape == (8, 16)
        assert np.allclose(grid, 42.0)


class TestCenterContribution:
    def test_center_is_100(self):
        geo = FrameGeometry(640, 360)
        t = track([det(i, BBox(320 - 10, 180 - 10, 20, 20)) for i in range(4)])
        assert center_contribution(t, geo) == pytest.approx(100.0)

    def test_origin_is_0(self):
        geo = FrameGeometry(640, 360)
        t = track([det(0, BBox(-10, -10, 20, 20))])
        assert center_contribution(t, geo) == pytest.approx(0.0)

    def test_midpoint_is_50(self):
        geo = FrameGeometry(640, 360)
        t = track([det(0, BBox(160 - 10, 90 - 10, 20, 20))])
        assert center_contribution(t, geo) == pytest.approx(50.0)

    def test_scale_invariance(self):
        rng = random.Random(2)
        for _ in range(50):
            w, h = rng.randint(100, 1000), rng.randint(100, 1000)
            cx, cy = rng.uniform(0, w), rng.uniform(0, h)
            scale = rng.uniform(0.1, 10.0)
            t1 = track([det(0, BBox(cx - 5, cy - 5, 10, 10))])
            t2 = track([det(0, BBox(cx * scale - 5, cy * scale - 5, 10, 10))])
            geo1 = FrameGeometry(w, h)
            geo2 = FrameGeometry(int(round(w * scale)), int(round(h * scale)))
            if geo2.width / geo2.height != w / h:
                continue  # integer rounding broke the exact similarity
            assert center_contribution(t1, geo1) == pytest.approx(
                center_contribution(t2, geo2), abs=1e-6
            )

    def test_in_frame_range(self):
        rng = random.Random(3)
        geo = FrameGeometry(640, 360)
        for _ in range(100):
            cx, cy = rng.uniform(0, 640), rng.uniform(0, 360)
            t = track([det(0, BBox(cx - 1, cy - 1, 2, 2))])
            assert 0.0 <= center_contribution(t, geo) <= 100.0


class TestLengthConsistency:
    STATS = CorpusStats(total_words=1000, total_speaking_time=100.0, frame_rate=25.0)

    def test_worked_example(self):
        # expected length 5 * 25 / 10 = 12.5 frames; gap to 20 is 7.5
        assert length_consistency(20, 5, self.STATS) == pytest.approx(1 / 7.5)

    def test_exact_match_hits_epsilon_guard(self):
        stats = CorpusStats(total_words=1000, total_speaking_time=100.0, frame_rate=10.0)
        # expected = 4 * 10 / 10 = 4 frames
        assert length_consistency(4, 4, stats) == pytest.approx(1e6)

    def test_reciprocal_law(self):
        # doubling the gap halves the value: gap 7.5 at L=20, gap 15 at L=27.5
        a = length_consistency(20, 5, self.STATS)
        assert length_consistency(27.5, 5, self.STATS) == pytest.approx(a / 2)

    def test_strictly_decreasing_in_gap(self):
        values = [length_consistency(13 + k, 5, self.STATS) for k in range(6)]
        assert all(x > y for x, y in zip(values, values[1:]))


class TestMotionRegion:
    def test_square_landmarks(self):
        # square with centroid y = 15: the lower edge points (y=20) survive
        pts = ((10.0, 10.0), (20.0, 10.0), (10.0, 20.0), (20.0, 20.0))
        region = motion_region(det(0, BBox(5, 5, 20, 20), pts), 640, 480)
        # tight box of (10,20)-(20,20) is 10 wide, 0 tall; height borrows 15% of width
        assert region.w == pytest.approx(10 * 1.15)
        assert region.h == pytest.approx(10 * 0.15)
        assert region.center[0] == pytest.approx(15.0)
        assert region.center[1] == pytest.approx(20.0)

    def test_fallback_lower_half(self):
        region = motion_region(det(0, BBox(10, 20, 30, 40)), 640, 480)
        assert (region.x, region.y, region.w, region.h) == (10, 40, 30, 20)

    def test_collinear_horizontal(self):
        pts = ((10.0, 10.0), (30.0, 10.0), (50.0, 10.0))
        region = motion_region(det(0, BBox(5, 5, 50, 20), pts), 640, 480)
        assert region.h > 0

    def test_lower_points_span(self):
        pts = ((0.0, 0.0), (40.0, 0.0), (10.0, 30.0), (30.0, 34.0))
        region = motion_region(det(0, BBox(0, 0, 40, 40), pts), 640, 480)
        # centroid y = 16; lower points are (10,30) and (30,34)
        assert region.x == pytest.approx(10 - 0.15 * 20 / 2)
        assert region.w == pytest.approx(20 * 1.15)


class TestVisualMotion:
    def test_static_scene_all_zero(self):
        frames = gray_frames([100] * 6)
        t = track([det(i, BBox(10, 10, 20, 20)) for i in range(6)])
        signal = visual_motion_signal(t, frames, SyncWindow(0, 5))
        assert signal.tolist() == [0.0] * 6

    def test_alternating_region(self):
        frames = gray_frames([0, 10, 0, 10, 0])
        t = track([det(i, BBox(10, 10, 20, 20)) for i in range(5)])
        signal = visual_motion_signal(t, frames, SyncWindow(0, 4))
        assert signal[0] == 0.0
        assert np.allclose(signal[1:], 100.0)

    def test_single_frame_window(self):
        frames = gray_frames([0, 10])
        t = track([det(i, BBox(10, 10, 20, 20)) for i in range(2)])
        assert visual_motion_signal(t, frames, SyncWindow(1, 1)).tolist() == [0.0]

    def test_window_outside_span(self):
        frames = gray_frames([0, 0, 0])
        t = track([det(1, BBox(10, 10, 20, 20)), det(2, BBox(10, 10, 20, 20))])
        with pytest.raises(WindowOutOfRange):
            visual_motion_signal(t, frames, SyncWindow(0, 2))


def oracle_av(y_a, y_v):
    """Straight z-score inner product, written independently of the package."""
    a = np.asarray(y_a, float)
    v = np.asarray(y_v, float)
    za = np.zeros_like(a) if a.std() == 0 else (a - a.mean()) / a.std()
    zv = np.zeros_like(v) if v.std() == 0 else (v - v.mean()) / v.std()
    return float(np.dot(za, zv)) / math.sqrt(len(a))


class TestAvSynchrony:
    def test_constant_signal_zero(self):
        window = SyncWindow(0, 9)
        assert av_synchrony(np.ones(10), np.arange(10), window) == 0.0
        assert av_synchrony(np.arange(10), np.zeros(10), window) == 0.0

    def test_equal_signals_sqrt_n(self):
        rng = np.random.default_rng(7)
        y = rng.normal(size=100)
        assert av_synchrony(y, y, SyncWindow(0, 99)) == pytest.approx(10.0)

    def test_negated_signal(self):
        rng = np.random.default_rng(8)
        y = rng.normal(size=25)
        assert av_synchrony(y, -y, SyncWindow(0, 24)) == pytest.approx(-5.0)

    def test_sign_flip(self):
        rng = np.random.default_rng(9)
        a, v = rng.normal(size=40), rng.normal(size=40)
        w = SyncWindow(10, 49)
        assert av_synchrony(a, -v, w) == pytest.approx(-av_synchrony(a, v, w))

    def test_affine_invariance(self):
        rng = np.random.default_rng(10)
        a, v = rng.normal(size=30), rng.normal(size=30)
        w = SyncWindow(0, 29)
        base = av_synchrony(a, v, w)
        assert av_synchrony(3.5 * a + 11.0, v, w) == pytest.approx(base)
        assert av_synchrony(a, 0.25 * v - 2.0, w) == pytest.approx(base)

    def test_matches_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = rng.integers(2, 60)
            a = rng.normal(size=n)
            v = rng.normal(size=n)
            got = av_synchrony(a, v, SyncWindow(0, int(n) - 1))
            assert got == pytest.approx(oracle_av(a, v), rel=1e-12)

"""Per-tracklet cues used by the speaker cascade.

Four scalar features rank candidate tracklets within one subtitle segment:
mouth-area motion, closeness to the screen center, fit between tracklet
length and the expected speaking length, and audio-visual synchrony.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .media_ingest import BBox, DetectionRecord

MOUTH_GRID_W = 16
MOUTH_GRID_H = 8
LC_EPSILON = 1e-6


class TrackletTooShort(Exception):
    """Lip motion needs at least two detections."""


class WindowOutOfRange(Exception):
    """A sync window does not lie within the tracklet span."""


@dataclass(frozen=True)
class FrameGeometry:
    """Screen dimensions with the derived center point."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"bad frame geometry {self.width}x{self.height}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.width / 2.0, self.height / 2.0)

    @property
    def corner_distance(self) -> float:
        """Distance from the origin to the screen center."""
        cx, cy = self.center
        return math.hypot(cx, cy)


@dataclass(frozen=True)
class CorpusStats:
    """Whole-input speech statistics backing the length-fit feature."""

    total_words: int
    total_speaking_time: float  # seconds
    frame_rate: float

    def __post_init__(self) -> None:
        if self.total_words <= 0:
            raise ValueError("total_words must be positive")
        if self.total_speaking_time <= 0:
            raise ValueError("total_speaking_time must be positive")
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")

    @property
    def mean_speaking_speed(self) -> float:
        """Words per second over the whole input."""
        return self.total_words / self.total_speaking_time


@dataclass(frozen=True)
class SyncWindow:
    """Inclusive frame range over which synchrony is evaluated."""

    t1: int
    t2: int

    def __post_init__(self) -> None:
        if self.t2 < self.t1:
            raise ValueError(f"window end {self.t2} before start {self.t1}")

    @property
    def length(self) -> int:
        return self.t2 - self.t1 + 1


def _intersect(a: BBox, b: BBox) -> BBox | None:
    x0, y0 = max(a.x, b.x), max(a.y, b.y)
    x1, y1 = min(a.right, b.right), min(a.bottom, b.bottom)
    if x1 <= x0 or y1 <= y0:
        return None
    return BBox(x0, y0, x1 - x0, y1 - y0)


def _lower_third(face: BBox) -> BBox:
    return BBox(face.x, face.y + 2.0 * face.h / 3.0, face.w, face.h / 3.0)


def mouth_region(det: DetectionRecord) -> BBox:
    """Mouth rectangle for one detection.

    With mouth corners: the corner span widened by 25% per side, 0.6x that
    width tall, vertically centered on the corners' midpoint, and kept
    inside a 20% expansion of the face box. Without usable corners: the
    lower third of the face box.
    """
    corners = det.mouth_corners
    if corners is not None:
        (x1, y1), (x2, y2) = corners
        span = abs(x2 - x1)
        if span > 0:
            pad = 0.25 * span
            w = span + 2.0 * pad
            h = 0.6 * w
            cy = (y1 + y2) / 2.0
            rect = BBox(min(x1, x2) - pad, cy - h / 2.0, w, h)
            clamped = _intersect(rect, det.face.expanded(1.2))
            if clamped is not None:
                return clamped
    return _lower_third(det.face)


def sample_grid(gray: np.ndarray, rect: BBox,
                grid_w: int = MOUTH_GRID_W, grid_h: int = MOUTH_GRID_H) -> np.ndarray:
    """Resample a rectangle of the luminance plane to a fixed grid of cell means.

    Cell boundaries are floored to pixel indices with every cell covering at
    least one pixel, so the grid is defined for regions smaller than itself.
    """
    height, width = gray.shape
    x0 = min(max(int(math.floor(rect.x)), 0), width - 1)
    y0 = min(max(int(math.floor(rect.y)), 0), height - 1)
    x1 = min(max(int(math.ceil(rect.right)), x0 + 1), width)
    y1 = min(max(int(math.ceil(rect.bottom)), y0 + 1), height)
    patch = gray[y0:y1, x0:x1].astype(np.float64)
    ph, pw = patch.shape

    col_lo = np.minimum((np.arange(grid_w) * pw) // grid_w, pw - 1)
    col_hi = np.maximum(((np.arange(grid_w) + 1) * pw) // grid_w, col_lo + 1)
    row_lo = np.minimum((np.arange(grid_h) * ph) // grid_h, ph - 1)
    row_hi = np.maximum(((np.arange(grid_h) + 1) * ph) // grid_h, row_lo + 1)

    integral = np.zeros((ph + 1, pw + 1))
    integral[1:, 1:] = patch.cumsum(axis=0).cumsum(axis=1)
    sums = (
        integral[np.ix_(row_hi, col_hi)]
        - integral[np.ix_(row_lo, col_hi)]
        - integral[np.ix_(row_hi, col_lo)]
        + integral[np.ix_(row_lo, col_lo)]
    )
    areas = (row_hi - row_lo)[:, None] * (col_hi - col_lo)[None, :]
    return sums / areas


def grid_msd(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared difference between two equally shaped grids."""
    d = a - b
    return float(np.mean(d * d))


def msd_over_grids(grids, span_frames: int) -> float:
    """Average of consecutive-grid MSDs, normalized by the tracklet span."""
    if span_frames < 2 or len(grids) < 2:
        raise TrackletTooShort(f"need at least 2 frames, have span {span_frames}")
    total = sum(grid_msd(a, b) for a, b in zip(grids, grids[1:]))
    return total / (span_frames - 1)


def lip_motion_msd(tracklet, frames) -> float:
    """Mouth-motion feature: average MSD of the mouth grid between frames."""
    records = tracklet.records
    if tracklet.length < 2 or len(records) < 2:
        raise TrackletTooShort(f"tracklet {tracklet.id} spans {tracklet.length} frame(s)")
    grids = [
        sample_grid(frames[r.frame_index].gray, mouth_region(r)) for r in records
    ]
    return msd_over_grids(grids, tracklet.length)


def center_contribution(tracklet, geometry: FrameGeometry) -> float:
    """Closeness to the screen center, averaged over the tracklet, 0..100 on screen."""
    cx, cy = geometry.center
    denom = geometry.corner_distance
    total = 0.0
    for record in tracklet.records:
        px, py = record.face.center
        total += 100.0 * (1.0 - math.hypot(px - cx, py - cy) / denom)
    return total / len(tracklet.records)


def length_consistency(tracklet_len: int, segment_words: int, stats: CorpusStats) -> float:
    """Reciprocal gap between tracklet length and the expected speaking length.

    The expectation converts the segment's word count to frames at the
    corpus mean speaking speed. The gap is floored at a small epsilon, so a
    perfect match yields 1e6 rather than a division by zero.
    """
    if tracklet_len <= 0:
        raise ValueError("tracklet length must be positive")
    if segment_words <= 0:
        raise ValueError("segment word count must be positive")
    expected = segment_words * stats.frame_rate / stats.mean_speaking_speed
    return 1.0 / max(abs(tracklet_len - expected), LC_EPSILON)


def motion_region(det: DetectionRecord, frame_width: int, frame_height: int) -> BBox:
    """Region watched for speech-related motion.

    With landmarks: the tight box of all points at or below the landmark
    centroid's vertical level, expanded 15% (a degenerate dimension borrows
    15% of the other), clipped to the frame. Without landmarks: the lower
    half of the face box.
    """
    if det.landmarks:
        pts = np.asarray(det.landmarks, dtype=np.float64)
        centroid_y = pts[:, 1].mean()
        low = pts[pts[:, 1] >= centroid_y]
        x0, y0 = low.min(axis=0)
        x1, y1 = low.max(axis=0)
        w, h = x1 - x0, y1 - y0
        if w > 0 or h > 0:
            pad_w = 0.15 * (w if w > 0 else h)
            pad_h = 0.15 * (h if h > 0 else w)
            box = BBox(x0 - pad_w / 2.0, y0 - pad_h / 2.0, w + pad_w, h + pad_h)
            clipped = box.clipped(frame_width, frame_height)
            if clipped is not None:
                return clipped
    face = det.face
    half = BBox(face.x, face.y + face.h / 2.0, face.w, face.h / 2.0)
    return half.clipped(frame_width, frame_height) or half


def _nearest_record(records, frame: int) -> DetectionRecord:
    best = records[0]
    best_gap = abs(records[0].frame_index - frame)
    for record in records[1:]:
        gap = abs(record.frame_index - frame)
        if gap < best_gap:
            best, best_gap = record, gap
    return best


def visual_motion_signal(tracklet, frames, window: SyncWindow) -> np.ndarray:
    """Per-frame motion energy inside the tracklet's motion region.

    Entry k is the mean squared luminance difference between frames
    t1+k and t1+k-1 within the motion region; the first entry is 0.
    """
    if window.t1 < tracklet.first_frame or window.t2 > tracklet.last_frame:
        raise WindowOutOfRange(
            f"window [{window.t1}, {window.t2}] outside tracklet span "
            f"[{tracklet.first_frame}, {tracklet.last_frame}]"
        )
    out = np.zeros(window.length)
    for k, t in enumerate(range(window.t1 + 1, window.t2 + 1), start=1):
        record = _nearest_record(tracklet.records, t)
        cur = frames[t]
        prev = frames[t - 1]
        region = motion_region(record, cur.width, cur.height)
        rect = _pixel_bounds(region, cur.width, cur.height)
        if rect is None:
            continue
        x0, y0, x1, y1 = rect
        d = cur.gray[y0:y1, x0:x1].astype(np.float64) - prev.gray[y0:y1, x0:x1]
        out[k] = float(np.mean(d * d))
    return out


def _pixel_bounds(box: BBox, width: int, height: int):
    x0 = max(int(math.floor(box.x)), 0)
    y0 = max(int(math.floor(box.y)), 0)
    x1 = min(int(math.ceil(box.right)), width)
    y1 = min(int(math.ceil(box.bottom)), height)
    if x1 <= x0 or y1 <= y0:
        return None
    return x0, y0, x1, y1


def _zscore_or_zeros(x: np.ndarray) -> np.ndarray:
    std = float(x.std())
    if std == 0.0:
        return np.zeros_like(x)
    return (x - x.mean()) / std


def av_synchrony(y_a, y_v, window: SyncWindow) -> float:
    """Synchrony between the audio energy and visual motion signals.

    Both signals are z-scored over the window and their inner product is
    scaled by 1/sqrt(N), i.e. Pearson correlation times sqrt(N). A constant
    signal z-scores to all zeros, giving 0.
    """
    a = np.asarray(y_a, dtype=np.float64)
    v = np.asarray(y_v, dtype=np.float64)
    n = window.length
    if len(a) != n or len(v) != n:
        raise ValueError(f"signals of length {len(a)}/{len(v)} do not cover window of {n}")
    if n < 2:
        raise ValueError("synchrony needs a window of at least 2 frames")
    za = _zscore_or_zeros(a)
    zv = _zscore_or_zeros(v)
    return float(za @ zv) / math.sqrt(n)

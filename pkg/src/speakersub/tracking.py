"""Linking per-frame face detections into tracklets.

Two passes: a low-level pass links detections in consecutive frames by
overlap, size, and appearance; a second pass bridges short detection
dropouts by extrapolating motion. Both passes are greedy with fixed
tie-breaks so results are independent of input ordering.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .media_ingest import BBox, DetectionRecord, derive_clothing_box, mean_rgb

# Below this speed (px/frame) a step carries no usable heading.
_STATIC_SPEED = 0.5


@dataclass(frozen=True)
class AssociationParams:
    iou_min: float = 0.3
    size_ratio_max: float = 1.5
    appearance_dist_max: float = 60.0
    max_gap: int = 10
    motion_angle_max: float = 45.0
    min_overlap_fraction: float = 0.2

    def __post_init__(self) -> None:
        if not 0.0 < self.iou_min <= 1.0:
            raise ValueError(f"iou_min must be in (0, 1], got {self.iou_min}")
        for name in ("size_ratio_max", "appearance_dist_max", "max_gap",
                     "motion_angle_max", "min_overlap_fraction"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class Tracklet:
    """A temporally ordered chain of detections for one face."""

    id: int
    records: list[DetectionRecord]
    face_color: np.ndarray | None = None
    clothing_color: np.ndarray | None = None

    @property
    def first_frame(self) -> int:
        return self.records[0].frame_index

    @property
    def last_frame(self) -> int:
        return self.records[-1].frame_index

    @property
    def length(self) -> int:
        """Span in frames, inclusive of both ends."""
        return self.last_frame - self.first_frame + 1

    def mean_center(self) -> tuple[float, float]:
        xs = [r.face.center[0] for r in self.records]
        ys = [r.face.center[1] for r in self.records]
        return (sum(xs) / len(xs), sum(ys) / len(ys))

    def mean_face_box(self) -> BBox:
        cx, cy = self.mean_center()
        w = sum(r.face.w for r in self.records) / len(self.records)
        h = sum(r.face.h for r in self.records) / len(self.records)
        return BBox(cx - w / 2.0, cy - h / 2.0, w, h)


def _detection_appearance(frame, det: DetectionRecord):
    face_color = mean_rgb(frame, det.face)
    clothing = derive_clothing_box(det.face, frame.width, frame.height)
    clothing_color = mean_rgb(frame, clothing) if clothing is not None else None
    return face_color, clothing_color


def _appearance_distance(face_a, cloth_a, face_b, cloth_b) -> float:
    """Euclidean distance over mean colors; clothing included when both sides have it."""
    if face_a is None or face_b is None:
        return 0.0
    if cloth_a is not None and cloth_b is not None:
        va = np.concatenate([face_a, cloth_a])
        vb = np.concatenate([face_b, cloth_b])
    else:
        va, vb = face_a, face_b
    return float(np.linalg.norm(va - vb))


def _size_ratio(a: BBox, b: BBox) -> float:
    return max(a.w / b.w, b.w / a.w, a.h / b.h, b.h / a.h)


class _Builder:
    """Accumulates one tracklet with running mean appearance."""

    def __init__(self, tracklet_id: int, det: DetectionRecord, appearance):
        self.id = tracklet_id
        self.records = [det]
        self._face_sum = None
        self._face_n = 0
        self._cloth_sum = None
        self._cloth_n = 0
        self._add_appearance(appearance)

    def _add_appearance(self, appearance) -> None:
        face_color, clothing_color = appearance
        if face_color is not None:
            self._face_sum = face_color if self._face_sum is None else self._face_sum + face_color
            self._face_n += 1
        if clothing_color is not None:
            self._cloth_sum = (
                clothing_color if self._cloth_sum is None else self._cloth_sum + clothing_color
            )
            self._cloth_n += 1

    def add(self, det: DetectionRecord, appearance) -> None:
        self.records.append(det)
        self._add_appearance(appearance)

    @property
    def face_color(self):
        return None if self._face_n == 0 else self._face_sum / self._face_n

    @property
    def clothing_color(self):
        return None if self._cloth_n == 0 else self._cloth_sum / self._cloth_n

    def finish(self) -> Tracklet:
        return Tracklet(
            id=self.id,
            records=self.records,
            face_color=self.face_color,
            clothing_color=self.clothing_color,
        )


def associate_low_level(detections, frames, params: AssociationParams | None = None) -> list[Tracklet]:
    """Link consecutive-frame detections into tracklets.

    A detection extends a tracklet ending in the previous frame when face
    IoU, size ratio, and mean-color distance (face plus clothing where
    available) are all within bounds. Matching is greedy by descending IoU,
    ties broken by the detection's x coordinate; every detection lands in
    exactly one tracklet. `frames` may be None to skip appearance checks.
    """
    params = params or AssociationParams()
    ordered = sorted(detections, key=lambda d: (d.frame_index, d.face.x, d.face.y, d.face.w))
    by_frame: dict[int, list[DetectionRecord]] = {}
    for det in ordered:
        by_frame.setdefault(det.frame_index, []).append(det)

    finished: list[Tracklet] = []
    active: list[_Builder] = []
    prev_frame: int | None = None
    next_id = 0

    for frame_index in sorted(by_frame):
        dets = by_frame[frame_index]
        frame = frames[frame_index] if frames is not None else None
        appearances = [
            _detection_appearance(frame, d) if frame is not None else (None, None)
            for d in dets
        ]

        if prev_frame is not None and frame_index != prev_frame + 1:
            finished.extend(b.finish() for b in active)
            active = []

        pairs = []
        for bi, builder in enumerate(active):
            tail = builder.records[-1].face
            for di, det in enumerate(dets):
                iou = tail.iou(det.face)
                if iou < params.iou_min:
                    continue
                if _size_ratio(tail, det.face) > params.size_ratio_max:
                    continue
                dist = _appearance_distance(
                    builder.face_color, builder.clothing_color, *appearances[di]
                )
                if dist > params.appearance_dist_max:
                    continue
                pairs.append((-iou, det.face.x, builder.id, bi, di))
        pairs.sort()

        used_builders: set[int] = set()
        used_dets: set[int] = set()
        for _, _, _, bi, di in pairs:
            if bi in used_builders or di in used_dets:
                continue
            active[bi].add(dets[di], appearances[di])
            used_builders.add(bi)
            used_dets.add(di)

        survivors = [active[bi] for bi in sorted(used_builders)]
        finished.extend(active[bi].finish() for bi in range(len(active)) if bi not in used_builders)
        for di, det in enumerate(dets):
            if di not in used_dets:
                survivors.append(_Builder(next_id, det, appearances[di]))
                next_id += 1
        active = survivors
        prev_frame = frame_index

    finished.extend(b.finish() for b in active)
    finished.sort(key=lambda t: (t.first_frame, t.id))
    return finished


def _tail_velocity(records) -> tuple[float, float]:
    if len(records) < 2:
        return (0.0, 0.0)
    a, b = records[-2], records[-1]
    dt = b.frame_index - a.frame_index
    (ax, ay), (bx, by) = a.face.center, b.face.center
    return ((bx - ax) / dt, (by - ay) / dt)


def _head_velocity(records) -> tuple[float, float]:
    if len(records) < 2:
        return (0.0, 0.0)
    a, b = records[0], records[1]
    dt = b.frame_index - a.frame_index
    (ax, ay), (bx, by) = a.face.center, b.face.center
    return ((bx - ax) / dt, (by - ay) / dt)


def _heading_ok(va, vb, max_degrees: float) -> bool:
    speed_a = math.hypot(*va)
    speed_b = math.hypot(*vb)
    if speed_a < _STATIC_SPEED or speed_b < _STATIC_SPEED:
        return True
    cos = (va[0] * vb[0] + va[1] * vb[1]) / (speed_a * speed_b)
    return math.degrees(math.acos(max(-1.0, min(1.0, cos)))) <= max_degrees


def _link_score(a: Tracklet, b: Tracklet, params: AssociationParams) -> float | None:
    """IoU of A's extrapolated tail at B's head, or None when incompatible."""
    gap = b.first_frame - a.last_frame
    if gap <= 0 or gap > params.max_gap:
        return None
    tail = a.records[-1].face
    head = b.records[0].face
    if _size_ratio(tail, head) > params.size_ratio_max:
        return None
    vx, vy = _tail_velocity(a.records)
    cx, cy = tail.center
    predicted = BBox(
        cx + vx * gap - tail.w / 2.0, cy + vy * gap - tail.h / 2.0, tail.w, tail.h
    )
    iou = predicted.iou(head)
    if iou < params.iou_min:
        return None
    dist = _appearance_distance(a.face_color, a.clothing_color, b.face_color, b.clothing_color)
    if dist > params.appearance_dist_max:
        return None
    if not _heading_ok(_tail_velocity(a.records), _head_velocity(b.records), params.motion_angle_max):
        return None
    return iou


def _merge(a: Tracklet, b: Tracklet) -> Tracklet:
    na, nb = len(a.records), len(b.records)

    def weighted(x, y):
        if x is None or y is None:
            return x if y is None else y
        return (x * na + y * nb) / (na + nb)

    return Tracklet(
        id=a.id,
        records=a.records + b.records,
        face_color=weighted(a.face_color, b.face_color),
        clothing_color=weighted(a.clothing_color, b.clothing_color),
    )


def link_tracklets(tracklets, params: AssociationParams | None = None) -> list[Tracklet]:
    """Bridge detection dropouts by merging compatible tracklets.

    A pair merges when extrapolating the earlier tracklet's motion across
    the gap lands on the later one's head with sufficient IoU, sizes and
    appearance agree, and the heading change stays within bounds. Merging
    repeats until no pair qualifies, visiting earlier-ending tracklets
    first; temporally overlapping tracklets never merge.
    """
    params = params or AssociationParams()
    pool = list(tracklets)
    merged = True
    while merged:
        merged = False
        pool.sort(key=lambda t: (t.last_frame, t.id))
        for i, a in enumerate(pool):
            best: tuple[float, int, int] | None = None
            for j, b in enumerate(pool):
                if i == j:
                    continue
                score = _link_score(a, b, params)
                if score is not None and (best is None or (-score, b.id) < (best[0], best[1])):
                    best = (-score, b.id, j)
            if best is not None:
                j = best[2]
                b = pool[j]
                pool = [t for k, t in enumerate(pool) if k not in (i, j)]
                pool.append(_merge(a, b))
                merged = True
                break
    pool.sort(key=lambda t: (t.first_frame, t.id))
    return pool


def tracklets_in_interval(tracklets, first: int, last: int,
                          min_overlap_fraction: float = 0.2) -> list[Tracklet]:
    """Tracklets overlapping [first, last] enough, cropped to the interval.

    A tracklet qualifies when its span covers at least
    `min_overlap_fraction` of the interval's frames.
    """
    if last < first:
        raise ValueError(f"bad interval [{first}, {last}]")
    interval_len = last - first + 1
    out = []
    for t in tracklets:
        lo = max(t.first_frame, first)
        hi = min(t.last_frame, last)
        if hi < lo:
            continue
        if (hi - lo + 1) < min_overlap_fraction * interval_len:
            continue
        records = [r for r in t.records if first <= r.frame_index <= last]
        if not records:
            continue
        out.append(Tracklet(
            id=t.id,
            records=records,
            face_color=t.face_color,
            clothing_color=t.clothing_color,
        ))
    return out


def dump_tracklets(tracklets, path: str | Path) -> None:
    """Write tracklets as newline-delimited records for debugging or re-ingestion."""
    with open(path, "w", encoding="utf-8") as fh:
        for t in tracklets:
            obj = {
                "tracklet": t.id,
                "frames": [r.frame_index for r in t.records],
                "boxes": [[r.face.x, r.face.y, r.face.w, r.face.h] for r in t.records],
            }
            fh.write(json.dumps(obj) + "\n")


def load_tracklets(path: str | Path) -> list[Tracklet]:
    tracklets = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            records = [
                DetectionRecord(
                    frame_index=f, face=BBox(*box), landmarks=None, confidence=1.0
                )
                for f, box in zip(obj["frames"], obj["boxes"])
            ]
            tracklets.append(Tracklet(id=obj["tracklet"], records=records))
    tracklets.sort(key=lambda t: (t.first_frame, t.id))
    return tracklets

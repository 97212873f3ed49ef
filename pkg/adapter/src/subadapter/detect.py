"""Face detector backends.

A detector is any callable taking an RGB frame and returning a list of
FaceObservation; everything else in the adapter is detector-agnostic. Two
backends ship here: a YuNet DNN wrapper for when a model file is available,
and a model-free warm-blob heuristic as the default fallback so the adapter
works in environments without downloadable weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np


@dataclass(frozen=True)
class FaceObservation:
    """One detected face: box, optional landmarks, confidence in [0, 1].

    Landmark convention (shared with the consumer's detection schema): the
    first two points are the left and right mouth corners; any further
    points support motion-region prediction.
    """

    x: float
    y: float
    w: float
    h: float
    landmarks: tuple | None
    confidence: float


def _synthesized_landmarks(x, y, w, h):
    """Mouth corners and jaw points estimated from face box geometry."""
    cx = x + w / 2.0
    mouth_y = y + 0.72 * h
    return (
        (cx - 0.20 * w, mouth_y), (cx + 0.20 * w, mouth_y),
        (cx - 0.33 * w, y + 0.90 * h), (cx, y + 0.97 * h),
        (cx + 0.33 * w, y + 0.90 * h),
    )


def heuristic_detector(min_area=150, max_area_frac=0.25):
    """Model-free fallback: warm, roughly box-shaped blobs.

    Finds connected components of warm-toned pixels (red clearly above
    blue and green) with a plausible aspect ratio and fill. Landmarks are
    synthesized from the box. Intended for synthetic footage and as a
    last resort when no detector weights exist; plug in a real detector
    for natural video.
    """

    def detect(rgb: np.ndarray) -> list[FaceObservation]:
        r = rgb[:, :, 0].astype(np.int16)
        g = rgb[:, :, 1].astype(np.int16)
        b = rgb[:, :, 2].astype(np.int16)
        mask = ((r > 120) & (r - g > 25) & (r - b > 35) & (g >= b - 10)).astype(np.uint8)
        mask = cv2.morphologyEx(mask, cv2.MORPH_CLOSE, np.ones((5, 5), np.uint8))
        count, _, stats, _ = cv2.connectedComponentsWithStats(mask, connectivity=4)
        max_area = max_area_frac * rgb.shape[0] * rgb.shape[1]
        found = []
        for k in range(1, count):
            x, y, w, h, area = (int(v) for v in stats[k])
            if area < min_area or area > max_area or w < 8 or h < 8:
                continue
            aspect = w / h
            if not 0.4 <= aspect <= 2.5:
                continue
            fill = area / (w * h)
            if fill < 0.35:
                continue
            found.append(FaceObservation(
                x=float(x), y=float(y), w=float(w), h=float(h),
                landmarks=_synthesized_landmarks(x, y, w, h),
                confidence=min(1.0, 0.4 + 0.6 * fill),
            ))
        found.sort(key=lambda f: (f.x, f.y))
        return found

    return detect


def yunet_detector(model_path: str, score_threshold: float = 0.6):
    """YuNet DNN face detector; needs its ONNX model file on disk.

    YuNet reports five landmarks (eyes, nose tip, mouth corners); the
    mouth corners map to our leading pair and the nose tip rides along as
    a support point.
    """
    net = cv2.FaceDetectorYN_create(model_path, "", (320, 320),
                                    score_threshold=score_threshold)

    def detect(rgb: np.ndarray) -> list[FaceObservation]:
        h, w = rgb.shape[:2]
        net.setInputSize((w, h))
        _, faces = net.detect(cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))
        found = []
        if faces is None:
            return found
        for row in faces:
            x, y, bw, bh = (float(v) for v in row[:4])
            if bw <= 0 or bh <= 0:
                continue
            right_mouth = (float(row[10]), float(row[11]))
            left_mouth = (float(row[12]), float(row[13]))
            nose = (float(row[8]), float(row[9]))
            landmarks = (left_mouth, right_mouth, nose)
            if not _corners_inside(landmarks[:2], x, y, bw, bh):
                landmarks = None
            found.append(FaceObservation(
                x=x, y=y, w=bw, h=bh,
                landmarks=landmarks,
                confidence=max(0.0, min(1.0, float(row[14]))),
            ))
        found.sort(key=lambda f: (f.x, f.y))
        return found

    return detect


def _corners_inside(corners, x, y, w, h, slack=1.2):
    """The consumer schema requires mouth corners within a 20% face expansion."""
    cx, cy = x + w / 2.0, y + h / 2.0
    ex, ey, ew, eh = cx - slack * w / 2.0, cy - slack * h / 2.0, slack * w, slack * h
    return all(ex <= px <= ex + ew and ey <= py <= ey + eh for px, py in corners)

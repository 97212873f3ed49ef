"""Output emitters: positioned ASS subtitles, a placement report, debug frames.

ASS is used for the positioned output because it carries absolute event
positions portably; players overlay it without re-encoding the video.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .features import FrameGeometry
from .media_ingest import BBox, pixel_rect
from .placement import Placement
from .segmentation import SpeakingVideoSegment
from .speaker_detect import SpeakerDecision, stage_report

ARROW_SIZE = 12.0


@dataclass(frozen=True)
class AssStyle:
    font_name: str = "Arial"
    font_size: int = 20


def format_ass_time(seconds: float) -> str:
    """ASS timestamp `H:MM:SS.cc`, rounded half up to centiseconds."""
    cs = int(math.floor(seconds * 100.0 + 0.5))
    s, cs = divmod(cs, 100)
    m, s = divmod(s, 60)
    h, m = divmod(m, 60)
    return f"{h:d}:{m:02d}:{s:02d}.{cs:02d}"


def _num(value: float) -> str:
    """Compact coordinate formatting: integral floats lose the decimal point."""
    if value == int(value):
        return str(int(value))
    return f"{value:.2f}"


def _arrow_points(box_x: float, box_y: float, box_w: float, box_h: float,
                  target: tuple[float, float]) -> list[tuple[float, float]]:
    """Triangle of fixed size on the box edge nearest the target, pointing at it."""
    tx, ty = target
    half = ARROW_SIZE / 2.0
    dx = max(box_x - tx, tx - (box_x + box_w), 0.0)
    dy = max(box_y - ty, ty - (box_y + box_h), 0.0)
    if dx > dy:
        edge_x = box_x if tx < box_x else box_x + box_w
        apex_x = edge_x - ARROW_SIZE if tx < box_x else edge_x + ARROW_SIZE
        base_y = min(max(ty, box_y + half), box_y + box_h - half)
        return [(edge_x, base_y - half), (edge_x, base_y + half), (apex_x, ty)]
    edge_y = box_y if ty < box_y else box_y + box_h
    apex_y = edge_y - ARROW_SIZE if ty < box_y else edge_y + ARROW_SIZE
    base_x = min(max(tx, box_x + half), box_x + box_w - half)
    return [(base_x - half, edge_y), (base_x + half, edge_y), (tx, apex_y)]


def emit_ass(placements, screen: FrameGeometry, frame_rate: float,
             style: AssStyle | None = None) -> str:
    """Render placements as an ASS document.

    Placed segments get a top-left anchored boxed Dialogue at the box
    position plus a drawing event with a small triangle toward the speaker;
    default segments get a bottom-center Dialogue with no arrow. Event
    times come from the refined frame intervals at `frame_rate`.
    """
    style = style or AssStyle()
    lines = [
        "[Script Info]",
        "Title: speakersub output",
        "ScriptType: v4.00+",
        f"PlayResX: {screen.width}",
        f"PlayResY: {screen.height}",
        "WrapStyle: 2",
        "ScaledBorderAndShadow: yes",
        "",
        "[V4+ Styles]",
        "Format: Name, Fontname, Fontsize, PrimaryColour, SecondaryColour, "
        "OutlineColour, BackColour, Bold, Italic, Underline, StrikeOut, "
        "ScaleX, ScaleY, Spacing, Angle, BorderStyle, Outline, Shadow, "
        "Alignment, MarginL, MarginR, MarginV, Encoding",
        f"Style: Default,{style.font_name},{style.font_size},&H00FFFFFF,&H000000FF,"
        "&H00000000,&H80000000,0,0,0,0,100,100,0,0,3,1,0,2,10,10,10,1",
        "",
        "[Events]",
        "Format: Layer, Start, End, Style, Name, MarginL, MarginR, MarginV, Effect, Text",
    ]

    for placement in placements:
        segment = placement.segment
        if segment is None:
            continue
        interval = segment.refined_interval
        start = format_ass_time(interval.first / frame_rate)
        end = format_ass_time((interval.last + 1) / frame_rate)
        text = "\\N".join(placement.box.lines)
        if placement.is_default:
            cx = placement.x + placement.box.width / 2.0
            by = placement.y + placement.box.height
            lines.append(
                f"Dialogue: 0,{start},{end},Default,,0,0,0,,"
                f"{{\\an2\\pos({_num(cx)},{_num(by)})}}{text}"
            )
            continue
        lines.append(
            f"Dialogue: 0,{start},{end},Default,,0,0,0,,"
            f"{{\\an7\\pos({_num(placement.x)},{_num(placement.y)})}}{text}"
        )
        if placement.arrow_target is not None:
            pts = _arrow_points(
                placement.x, placement.y,
                placement.box.width, placement.box.height,
                placement.arrow_target,
            )
            path = (
                f"m {_num(pts[0][0])} {_num(pts[0][1])} "
                f"l {_num(pts[1][0])} {_num(pts[1][1])} "
                f"l {_num(pts[2][0])} {_num(pts[2][1])}"
            )
            lines.append(
                f"Dialogue: 1,{start},{end},Default,,0,0,0,,"
                f"{{\\an7\\pos(0,0)\\p1\\bord0\\c&H00FFFF&}}{path}{{\\p0}}"
            )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ReportItem:
    """One subsegment's decision and placement, ready for the report."""

    segment: SpeakingVideoSegment
    decision: SpeakerDecision
    placement: Placement


def _segment_key(segment: SpeakingVideoSegment, ordinal: int) -> dict:
    key = {"segment_index": segment.parent.index, "part": ordinal}
    if segment.turn is not None:
        key["turn"] = segment.turn.turn_index
    return key


def emit_report(items, weights: tuple[float, float, float],
                include_placement: bool = True) -> str:
    """Newline-delimited JSON records, one per subsegment.

    With `include_placement` off (detection-only runs) the records carry
    the same decision content but no position or energy fields.
    """
    w1, w2, w3 = weights
    ordinals: dict[int, int] = {}
    lines = []
    for item in items:
        seg = item.segment
        ordinal = ordinals.get(seg.parent.index, 0)
        ordinals[seg.parent.index] = ordinal + 1
        record = _segment_key(seg, ordinal)
        record["interval"] = [seg.frame_interval.first, seg.frame_interval.last]
        record["refined"] = [seg.refined_interval.first, seg.refined_interval.last]
        record["assigned"] = seg.assigned
        record["text"] = list(seg.lines)
        record["cascade"] = stage_report(item.decision)
        features = {}
        for tid, f in item.decision.features.items():
            features[str(tid)] = {"msd": f.msd, "cc": f.cc, "lc": f.lc, "av": f.av}
        record["features"] = features
        if include_placement:
            placement = item.placement
            if placement.is_default:
                record["position"] = "default"
                record["anchor"] = None
                record["energy"] = None
            else:
                record["position"] = [placement.x, placement.y]
                record["anchor"] = placement.anchor.value
                local, glob, layout = placement.terms
                record["energy"] = {
                    "local": local,
                    "global": glob,
                    "layout": layout,
                    "total": w1 * local + w2 * glob + w3 * layout,
                }
        lines.append(json.dumps(record))
    return "\n".join(lines) + ("\n" if lines else "")


def _draw_rect(img: np.ndarray, box: BBox, color, thickness: int = 2) -> None:
    rect = pixel_rect(box, img.shape[1], img.shape[0])
    if rect is None:
        return
    x0, y0, x1, y1 = rect
    t = thickness
    img[y0:min(y0 + t, y1), x0:x1] = color
    img[max(y1 - t, y0):y1, x0:x1] = color
    img[y0:y1, x0:min(x0 + t, x1)] = color
    img[y0:y1, max(x1 - t, x0):x1] = color


def _draw_line(img: np.ndarray, a: tuple[float, float], b: tuple[float, float], color) -> None:
    steps = int(max(abs(b[0] - a[0]), abs(b[1] - a[1]))) + 1
    xs = np.clip(np.linspace(a[0], b[0], steps).round().astype(int), 0, img.shape[1] - 1)
    ys = np.clip(np.linspace(a[1], b[1], steps).round().astype(int), 0, img.shape[0] - 1)
    img[ys, xs] = color


SPEAKER_COLOR = (255, 220, 0)
NON_SPEAKER_COLOR = (220, 40, 40)
BOX_COLOR = (255, 255, 255)


@dataclass(frozen=True)
class AnnotateItem:
    """What to draw for one subsegment."""

    placement: Placement
    speaker_boxes: dict[int, BBox]       # frame index -> speaker face box
    non_speaker_boxes: dict[int, list[BBox]]


def annotate_frames(frames, items, out_dir: str | Path) -> int:
    """Write debug PNGs for every frame of the assigned subsegments.

    Draws the speaker box, non-speaker boxes, the subtitle rectangle, and
    a line from the subtitle box toward the speaker. Returns the number of
    images written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    for item in items:
        placement = item.placement
        segment = placement.segment
        if segment is None or not segment.assigned:
            continue
        interval = segment.frame_interval
        for t in range(interval.first, interval.last + 1):
            if not 0 <= t < len(frames):
                continue
            img = frames[t].rgb.copy()
            for box in item.non_speaker_boxes.get(t, []):
                _draw_rect(img, box, NON_SPEAKER_COLOR)
            speaker_box = item.speaker_boxes.get(t)
            if speaker_box is not None:
                _draw_rect(img, speaker_box, SPEAKER_COLOR)
            sub_box = BBox(placement.x, placement.y, placement.box.width, placement.box.height)
            _draw_rect(img, sub_box, BOX_COLOR)
            if placement.arrow_target is not None:
                _draw_line(img, placement.center, placement.arrow_target, SPEAKER_COLOR)
            Image.fromarray(img).save(out_dir / f"annotated_{t:06d}.png")
            written += 1
    return written

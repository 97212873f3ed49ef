"""Candidate subtitle positions and energy-based position choice.

Eight anchor points around the speaker's face are scored by a three-term
energy: pull toward the speaker and away from non-speakers, pull toward
the previous subtitle's position, and push away from the screen edges.
Positions chain forward greedily across segments within one shot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .features import FrameGeometry
from .media_ingest import BBox
from .segmentation import SpeakingVideoSegment


class TextTooWide(Exception):
    """Subtitle text cannot fit the screen at the configured metrics."""


class Anchor(Enum):
    # declaration order is the tie-break order
    ABOVE_LEFT = "above_left"
    ABOVE = "above"
    ABOVE_RIGHT = "above_right"
    BELOW_LEFT = "below_left"
    BELOW = "below"
    BELOW_RIGHT = "below_right"
    LEFT = "left"
    RIGHT = "right"


_ANCHOR_RANK = {anchor: i for i, anchor in enumerate(Anchor)}


@dataclass(frozen=True)
class FontConfig:
    """Fixed-width glyph metrics used to size subtitle boxes."""

    glyph_w: float = 10.0
    glyph_h: float = 20.0
    pad: float = 4.0


@dataclass(frozen=True)
class SubtitleBox:
    width: float
    height: float
    lines: tuple[str, ...]


@dataclass(frozen=True)
class CandidateAnchor:
    """One possible placement: anchor name plus the box top-left and center."""

    anchor: Anchor
    x: float
    y: float
    cx: float
    cy: float


@dataclass(frozen=True)
class PlacementContext:
    """Everything the energy function sees for one segment."""

    speaker: tuple[float, float]
    non_speakers: tuple[tuple[float, float], ...]
    previous: tuple[float, float] | None
    screen: FrameGeometry
    weights: tuple[float, float, float] = (1.0, 1.0, -1.0)


@dataclass(frozen=True)
class Placement:
    """Chosen position for one (sub)segment; anchor None means the default slot."""

    segment: SpeakingVideoSegment | None
    box: SubtitleBox
    anchor: Anchor | None
    x: float
    y: float
    energy: float | None
    arrow_target: tuple[float, float] | None
    terms: tuple[float, float, float] | None = None  # (local, global, layout)

    @property
    def is_default(self) -> bool:
        return self.anchor is None

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.box.width / 2.0, self.y + self.box.height / 2.0)


def measure_subtitle_box(lines, font: FontConfig,
                         max_width: float | None = None) -> SubtitleBox:
    """Box dimensions from line lengths and the glyph table."""
    lines = tuple(lines)
    if not lines or any(not line for line in lines):
        raise ValueError("subtitle lines must be non-empty")
    width = max(len(line) for line in lines) * font.glyph_w + 2 * font.pad
    height = len(lines) * font.glyph_h + 2 * font.pad
    if max_width is not None and width > max_width:
        raise TextTooWide(f"box of width {width} exceeds screen width {max_width}")
    return SubtitleBox(width=width, height=height, lines=lines)


def candidate_positions(face: BBox, box: SubtitleBox, screen: FrameGeometry,
                        margin: float = 8.0) -> list[CandidateAnchor]:
    """Up to eight candidate positions ringed around a face.

    Vertical neighbors sit half a face plus margin plus half a box away
    from the face center; horizontal neighbors likewise; corners combine
    both offsets. Candidates whose box leaves the screen are dropped.
    """
    fx, fy = face.center
    dx = face.w / 2.0 + margin + box.width / 2.0
    dy = face.h / 2.0 + margin + box.height / 2.0
    offsets = {
        Anchor.ABOVE_LEFT: (-dx, -dy),
        Anchor.ABOVE: (0.0, -dy),
        Anchor.ABOVE_RIGHT: (dx, -dy),
        Anchor.BELOW_LEFT: (-dx, dy),
        Anchor.BELOW: (0.0, dy),
        Anchor.BELOW_RIGHT: (dx, dy),
        Anchor.LEFT: (-dx, 0.0),
        Anchor.RIGHT: (dx, 0.0),
    }
    out = []
    for anchor in Anchor:
        ox, oy = offsets[anchor]
        cx, cy = fx + ox, fy + oy
        x, y = cx - box.width / 2.0, cy - box.height / 2.0
        if x < 0 or y < 0 or x + box.width > screen.width or y + box.height > screen.height:
            continue
        out.append(CandidateAnchor(anchor=anchor, x=x, y=y, cx=cx, cy=cy))
    return out


def remove_occluding(candidates, box: SubtitleBox, obstacles) -> list[CandidateAnchor]:
    """Drop candidates whose box would cover any of the given face boxes."""
    out = []
    for cand in candidates:
        cand_box = BBox(cand.x, cand.y, box.width, box.height)
        if not any(cand_box.intersects(ob) for ob in obstacles):
            out.append(cand)
    return out


def _dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def boundary_distance(point: tuple[float, float], screen: FrameGeometry) -> float:
    """Distance from a point to the nearest screen edge."""
    x, y = point
    return min(x, y, screen.width - x, screen.height - y)


def energy_terms(candidate: CandidateAnchor,
                 ctx: PlacementContext) -> tuple[float, float, float]:
    """The three energy components (local, global, layout) for a candidate.

    All distances are taken from the subtitle box center. The global term
    is 0 when no previous position exists.
    """
    center = (candidate.cx, candidate.cy)
    local = _dist(center, ctx.speaker) - sum(_dist(center, p) for p in ctx.non_speakers)
    glob = _dist(center, ctx.previous) if ctx.previous is not None else 0.0
    layout = boundary_distance(center, ctx.screen)
    return local, glob, layout


def energy(candidate: CandidateAnchor, ctx: PlacementContext) -> float:
    """Weighted total energy; lower is better."""
    w1, w2, w3 = ctx.weights
    local, glob, layout = energy_terms(candidate, ctx)
    total = w1 * local + w3 * layout
    if ctx.previous is not None:
        total += w2 * glob
    return total


def default_position(screen: FrameGeometry, box: SubtitleBox,
                     pad_bottom: float = 10.0) -> tuple[float, float]:
    """Bottom-center slot: horizontally centered, resting above the bottom edge."""
    return ((screen.width - box.width) / 2.0, screen.height - pad_bottom - box.height)


def place_segment(candidates, ctx: PlacementContext, box: SubtitleBox,
                  pad_bottom: float = 10.0,
                  segment: SpeakingVideoSegment | None = None) -> Placement:
    """Choose the lowest-energy candidate, or the default slot when none survive.

    Ties break by anchor declaration order regardless of input order.
    """
    best: CandidateAnchor | None = None
    best_energy = math.inf
    for cand in sorted(candidates, key=lambda c: _ANCHOR_RANK[c.anchor]):
        e = energy(cand, ctx)
        if e < best_energy:
            best, best_energy = cand, e
    if best is None:
        x, y = default_position(ctx.screen, box, pad_bottom)
        return Placement(segment=segment, box=box, anchor=None, x=x, y=y,
                         energy=None, arrow_target=None)
    return Placement(
        segment=segment,
        box=box,
        anchor=best.anchor,
        x=best.x,
        y=best.y,
        energy=best_energy,
        arrow_target=ctx.speaker,
        terms=energy_terms(best, ctx),
    )


@dataclass(frozen=True)
class PlacementTask:
    """Per-subsegment inputs for the forward placement pass."""

    segment: SpeakingVideoSegment
    box: SubtitleBox
    shot_id: int
    speaker: tuple[float, float] | None = None
    speaker_face: BBox | None = None
    non_speakers: tuple[tuple[float, float], ...] = ()
    obstacles: tuple[BBox, ...] = ()


def place_all(tasks, screen: FrameGeometry,
              weights: tuple[float, float, float] = (1.0, 1.0, -1.0),
              margin: float = 8.0, pad_bottom: float = 10.0) -> list[Placement]:
    """Greedy forward placement over subsegments in temporal order.

    The previous optimized position feeds the next segment's energy within
    one shot; the chain resets at shot changes and after any default
    placement. Segments without a speaker go to the default slot.
    """
    placements: list[Placement] = []
    previous: tuple[float, float] | None = None
    previous_shot: int | None = None
    for task in tasks:
        if previous_shot is not None and task.shot_id != previous_shot:
            previous = None
        previous_shot = task.shot_id

        if task.speaker is None or task.speaker_face is None:
            x, y = default_position(screen, task.box, pad_bottom)
            placements.append(Placement(
                segment=task.segment, box=task.box, anchor=None, x=x, y=y,
                energy=None, arrow_target=None,
            ))
            previous = None
            continue

        candidates = candidate_positions(task.speaker_face, task.box, screen, margin)
        candidates = remove_occluding(candidates, task.box, task.obstacles)
        ctx = PlacementContext(
            speaker=task.speaker,
            non_speakers=task.non_speakers,
            previous=previous,
            screen=screen,
            weights=weights,
        )
        placement = place_segment(candidates, ctx, task.box, pad_bottom, segment=task.segment)
        previous = None if placement.is_default else placement.center
        placements.append(placement)
    return placements

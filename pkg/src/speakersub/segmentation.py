"""Shot-cut detection and subtitle segment splitting.

Cuts are found by correlating adjacent-frame color histograms. Segments
are then split three ways before placement: at cuts, when the speaker
moves far from where they started, and between the turns of a
multi-speaker segment; finally the display interval is tightened to the
speaker tracklet's span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .media_ingest import DegenerateHistogram, histogram_similarity, rgb_histogram
from .subtitle_io import SpeakerTurn, SubtitleSegment, word_count

SHOT_THRESHOLD = 0.99


@dataclass(frozen=True)
class FrameInterval:
    """Inclusive frame range."""

    first: int
    last: int

    def __post_init__(self) -> None:
        if self.last < self.first:
            raise ValueError(f"bad interval [{self.first}, {self.last}]")

    @property
    def length(self) -> int:
        return self.last - self.first + 1

    def overlap(self, other: "FrameInterval | None") -> int:
        if other is None:
            return 0
        return max(0, min(self.last, other.last) - max(self.first, other.first) + 1)

    def contains(self, frame: int) -> bool:
        return self.first <= frame <= self.last


@dataclass(frozen=True)
class ShotChange:
    """First frame of a new shot, with the similarity that fell below threshold."""

    frame_index: int
    similarity: float


@dataclass(frozen=True)
class SpeakingVideoSegment:
    """A (sub)segment of video carrying subtitle text.

    `turn` is set when the text is one speaker's turn of a multi-speaker
    segment. After shot splitting, exactly one subsegment per parent is
    `assigned` (placed near its speaker); the rest show the text at the
    default position.
    """

    parent: SubtitleSegment
    frame_interval: FrameInterval
    refined_interval: FrameInterval
    assigned: bool = True
    turn: SpeakerTurn | None = None

    @property
    def subtitle(self) -> SubtitleSegment | SpeakerTurn:
        return self.turn if self.turn is not None else self.parent

    @property
    def lines(self) -> tuple[str, ...]:
        return self.turn.lines if self.turn is not None else self.parent.lines


def detect_shot_changes(frames, bins_per_channel: int = 16,
                        threshold: float = SHOT_THRESHOLD) -> list[ShotChange]:
    """Label every frame whose histogram correlates below threshold with its predecessor.

    Constant (degenerate) histograms compare as similar, so runs of uniform
    frames never spray cuts.
    """
    cuts: list[ShotChange] = []
    prev = None
    for frame in frames:
        hist = rgb_histogram(frame, bins_per_channel)
        if prev is not None:
            try:
                delta = histogram_similarity(prev, hist)
            except DegenerateHistogram:
                delta = 1.0
            if delta < threshold:
                cuts.append(ShotChange(frame_index=frame.index, similarity=delta))
        prev = hist
    return cuts


def _cut_frames(cuts) -> list[int]:
    return sorted(c.frame_index if isinstance(c, ShotChange) else int(c) for c in cuts)


def split_on_shot_changes(segment: SpeakingVideoSegment, cuts,
                          speaker_span: FrameInterval | None) -> list[SpeakingVideoSegment]:
    """Partition a segment at shot cuts; one piece keeps the speaker assignment.

    The piece overlapping the speaking span longest is `assigned`; all
    others fall back to the default position. Ties go to the earlier piece,
    as does everything when there is no speaking span.
    """
    interval = segment.frame_interval
    edges = [interval.first]
    edges += [c for c in _cut_frames(cuts) if interval.first < c <= interval.last]
    edges.append(interval.last + 1)
    pieces = [FrameInterval(a, b - 1) for a, b in zip(edges, edges[1:])]
    overlaps = [p.overlap(speaker_span) for p in pieces]
    best = overlaps.index(max(overlaps))
    return [
        replace(segment, frame_interval=p, refined_interval=p, assigned=(i == best))
        for i, p in enumerate(pieces)
    ]


def split_moving_speaker(segment: SpeakingVideoSegment, speaker,
                         beta: float = 1.0, min_subsegment: int = 12) -> list[SpeakingVideoSegment]:
    """Split a segment wherever its speaker has drifted far from rest.

    A new subsegment starts at the first frame whose face center lies more
    than beta mean face widths from the current subsegment's starting
    center, provided both the current and the remaining piece stay at least
    `min_subsegment` frames long. The text is carried whole into every
    piece; only its position is re-optimized.
    """
    interval = segment.frame_interval
    records = [r for r in speaker.records if interval.contains(r.frame_index)]
    if len(records) < 2:
        return [segment]
    mean_width = sum(r.face.w for r in records) / len(records)
    limit = beta * mean_width

    starts = [interval.first]
    anchor = records[0].face.center
    for record in records[1:]:
        t = record.frame_index
        cx, cy = record.face.center
        if (
            math.hypot(cx - anchor[0], cy - anchor[1]) > limit
            and t - starts[-1] >= min_subsegment
            and interval.last - t + 1 >= min_subsegment
        ):
            starts.append(t)
            anchor = (cx, cy)
    if len(starts) == 1:
        return [segment]
    edges = starts + [interval.last + 1]
    return [
        replace(segment, frame_interval=FrameInterval(a, b - 1),
                refined_interval=FrameInterval(a, b - 1))
        for a, b in zip(edges, edges[1:])
    ]


def _snap_to_transitions(edges: list[int], interval: FrameInterval, tracklets) -> list[int]:
    """Move inner edges to tracklet handover midpoints when unambiguous."""
    snapped = list(edges)
    for k in range(1, len(edges) - 1):
        left = FrameInterval(snapped[k - 1], snapped[k] - 1)
        right = FrameInterval(snapped[k], edges[k + 1] - 1)
        left_active = [t for t in tracklets
                       if left.overlap(FrameInterval(t.first_frame, t.last_frame)) > 0]
        right_active = [t for t in tracklets
                        if right.overlap(FrameInterval(t.first_frame, t.last_frame)) > 0]
        if len(left_active) != 1 or len(right_active) != 1:
            continue
        a, b = left_active[0], right_active[0]
        if a.id == b.id or a.last_frame >= b.first_frame:
            continue
        mid = (a.last_frame + b.first_frame + 1) // 2
        snapped[k] = min(max(mid, snapped[k - 1] + 1), edges[k + 1] - 1)
    return snapped


def split_multi_speaker(segment: SpeakingVideoSegment, turns,
                        tracklets=()) -> list[SpeakingVideoSegment]:
    """Divide a segment's time among speaker turns by word share.

    Each turn gets a contiguous sub-range proportional to its word count
    (at least one frame). When each side of a boundary has exactly one
    active tracklet and they differ, the boundary snaps to the midpoint of
    the handover gap. Speaker detection runs per sub-range downstream.
    """
    interval = segment.frame_interval
    if len(turns) <= 1 or interval.length < len(turns):
        return [segment]
    words = [max(word_count(t.lines), 1) for t in turns]
    total_words = sum(words)
    total_frames = interval.length

    edges = [interval.first]
    cum = 0
    for k, w in enumerate(words[:-1]):
        cum += w
        edge = interval.first + round(total_frames * cum / total_words)
        remaining_turns = len(words) - (k + 1)
        edge = max(edge, edges[-1] + 1)
        edge = min(edge, interval.last + 1 - remaining_turns)
        edges.append(edge)
    edges.append(interval.last + 1)

    if tracklets:
        edges = _snap_to_transitions(edges, interval, tracklets)

    return [
        replace(segment, frame_interval=FrameInterval(a, b - 1),
                refined_interval=FrameInterval(a, b - 1), turn=turn)
        for (a, b), turn in zip(zip(edges, edges[1:]), turns)
    ]


def refine_speaking_time(segment: SpeakingVideoSegment, speaker,
                         min_display: int = 15) -> FrameInterval:
    """Tighten the display interval to the speaker tracklet's span.

    Falls back to the segment's own interval when the intersection is empty
    or would flash for fewer than `min_display` frames.
    """
    interval = segment.frame_interval
    lo = max(interval.first, speaker.first_frame)
    hi = min(interval.last, speaker.last_frame)
    if hi < lo or hi - lo + 1 < min_display:
        return interval
    return FrameInterval(lo, hi)

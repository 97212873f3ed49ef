"""End-to-end analysis: subtitles plus evidence in, positioned subtitles out.

Per subtitle segment the flow is: split multi-speaker turns, pick the
speaker among the tracklets active in the segment, split at shot cuts and
on speaker movement, tighten display timing to the speaker's span, then
optimize every piece's position in one forward pass.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, replace

from .config import PipelineConfig
from .features import (
    CorpusStats,
    FrameGeometry,
    SyncWindow,
    TrackletTooShort,
    av_synchrony,
    center_contribution,
    length_consistency,
    lip_motion_msd,
    visual_motion_signal,
)
from .media_ingest import AudioEnergySeries
from .placement import Placement, PlacementTask, measure_subtitle_box, place_all
from .render_out import AnnotateItem, ReportItem
from .segmentation import (
    FrameInterval,
    ShotChange,
    SpeakingVideoSegment,
    detect_shot_changes,
    refine_speaking_time,
    split_moving_speaker,
    split_multi_speaker,
    split_on_shot_changes,
)
from .speaker_detect import FeatureProviders, detect_speaker
from .subtitle_io import SubtitleSegment, split_speaker_turns, word_count
from .tracking import Tracklet, associate_low_level, link_tracklets, tracklets_in_interval


@dataclass
class PipelineResult:
    segments: list[SubtitleSegment]
    cuts: list[ShotChange]
    screen: FrameGeometry
    tracklets: list[Tracklet]
    report_items: list[ReportItem]
    placements: list[Placement]
    annotate_items: list[AnnotateItem]


def frame_interval_for(segment: SubtitleSegment, frame_rate: float) -> FrameInterval:
    """Frames whose display time falls inside the segment's interval."""
    first = math.ceil(segment.start.seconds * frame_rate - 1e-9)
    last = math.ceil(segment.end.seconds * frame_rate - 1e-9) - 1
    return FrameInterval(first, max(last, first))


def corpus_stats_from_segments(segments, frame_rate: float) -> CorpusStats:
    """Whole-file speaking statistics; words counted after stripping turn markers."""
    total_ms = sum(s.end.millis - s.start.millis for s in segments)
    words = sum(
        word_count(turn.lines) for s in segments for turn in split_speaker_turns(s)
    )
    return CorpusStats(
        total_words=max(words, 1),
        total_speaking_time=total_ms / 1000.0,
        frame_rate=frame_rate,
    )


def _build_providers(frames, geometry: FrameGeometry, stats: CorpusStats,
                     words: int, interval: FrameInterval,
                     audio: AudioEnergySeries | None) -> FeatureProviders:
    def msd(t: Tracklet) -> float:
        try:
            return lip_motion_msd(t, frames)
        except TrackletTooShort:
            return 0.0

    def cc(t: Tracklet) -> float:
        return center_contribution(t, geometry)

    def lc(t: Tracklet) -> float:
        return length_consistency(t.length, max(words, 1), stats)

    av = None
    if audio is not None and len(audio.values) > 0:
        def av(t: Tracklet) -> float:
            lo = max(t.first_frame, interval.first)
            hi = min(t.last_frame, interval.last, len(audio.values) - 1, len(frames) - 1)
            if hi - lo + 1 < 2:
                return 0.0
            window = SyncWindow(lo, hi)
            y_v = visual_motion_signal(t, frames, window)
            y_a = audio.values[lo:hi + 1]
            return av_synchrony(y_a, y_v, window)

    return FeatureProviders(msd=msd, cc=cc, lc=lc, av=av)


def _crop_to(tracklet: Tracklet, interval: FrameInterval) -> Tracklet | None:
    records = [r for r in tracklet.records if interval.contains(r.frame_index)]
    if not records:
        return None
    return Tracklet(id=tracklet.id, records=records,
                    face_color=tracklet.face_color, clothing_color=tracklet.clothing_color)


def analyze(segments, frames, detections, audio: AudioEnergySeries | None,
            cfg: PipelineConfig, tracklets: list[Tracklet] | None = None) -> PipelineResult:
    """Run detection, splitting, and placement over a whole input."""
    stats = corpus_stats_from_segments(segments, cfg.frame_rate)
    screen = FrameGeometry(frames[0].width, frames[0].height)
    cuts = detect_shot_changes(frames, cfg.hist_bins, cfg.shot_threshold)
    cut_frames = [c.frame_index for c in cuts]
    if tracklets is None:
        assoc = cfg.association()
        tracklets = link_tracklets(associate_low_level(detections, frames, assoc), assoc)
    thresholds = cfg.thresholds()
    font = cfg.font()

    tasks: list[PlacementTask] = []
    task_decisions = []
    task_extras = []

    for segment in segments:
        interval = frame_interval_for(segment, cfg.frame_rate)
        whole = SpeakingVideoSegment(
            parent=segment, frame_interval=interval, refined_interval=interval
        )
        turns = split_speaker_turns(segment)
        if len(turns) > 1:
            active = tracklets_in_interval(
                tracklets, interval.first, interval.last, cfg.min_overlap_fraction
            )
            parts = split_multi_speaker(whole, turns, active)
        else:
            parts = [whole]

        for part in parts:
            part_iv = part.frame_interval
            candidates = tracklets_in_interval(
                tracklets, part_iv.first, part_iv.last, cfg.min_overlap_fraction
            )
            words = word_count(part.lines)
            providers = _build_providers(frames, screen, stats, words, part_iv, audio)
            decision = detect_speaker(candidates, providers, thresholds)
            speaker = next((t for t in candidates if t.id == decision.speaker_id), None)
            speaker_span = (
                refine_speaking_time(part, speaker, cfg.min_display)
                if speaker is not None else None
            )

            for child in split_on_shot_changes(part, cut_frames, speaker_span):
                if child.assigned and speaker is not None:
                    pieces = split_moving_speaker(child, speaker, cfg.beta, cfg.min_subsegment)
                else:
                    pieces = [child]
                for piece in pieces:
                    piece_speaker = speaker if piece.assigned else None
                    if piece_speaker is not None:
                        piece = replace(
                            piece,
                            refined_interval=refine_speaking_time(
                                piece, piece_speaker, cfg.min_display
                            ),
                        )
                    box = measure_subtitle_box(piece.lines, font, max_width=screen.width)
                    task, extras = _placement_task(
                        piece, box, piece_speaker, candidates, cut_frames
                    )
                    tasks.append(task)
                    task_decisions.append(decision)
                    task_extras.append(extras)

    placements = place_all(tasks, screen, cfg.weights, cfg.margin, cfg.pad_bottom)
    report_items = [
        ReportItem(segment=task.segment, decision=decision, placement=placement)
        for task, decision, placement in zip(tasks, task_decisions, placements)
    ]
    annotate_items = [
        AnnotateItem(placement=placement,
                     speaker_boxes=extras[0], non_speaker_boxes=extras[1])
        for placement, extras in zip(placements, task_extras)
    ]
    return PipelineResult(
        segments=list(segments),
        cuts=cuts,
        screen=screen,
        tracklets=tracklets,
        report_items=report_items,
        placements=placements,
        annotate_items=annotate_items,
    )


def _placement_task(piece: SpeakingVideoSegment, box, speaker: Tracklet | None,
                    candidates, cut_frames):
    """Assemble the placement inputs for one subsegment."""
    interval = piece.frame_interval
    shot_id = bisect_right(cut_frames, interval.first)

    speaker_center = None
    speaker_face = None
    speaker_boxes: dict[int, object] = {}
    if speaker is not None:
        cropped = _crop_to(speaker, interval)
        if cropped is not None:
            speaker_center = cropped.mean_center()
            speaker_face = cropped.mean_face_box()
            speaker_boxes = {r.frame_index: r.face for r in cropped.records}

    non_speakers = []
    obstacles = []
    non_speaker_boxes: dict[int, list] = {}
    for candidate in candidates:
        cropped = _crop_to(candidate, interval)
        if cropped is None:
            continue
        obstacles.append(cropped.mean_face_box())
        if speaker is not None and candidate.id == speaker.id:
            continue
        non_speakers.append(cropped.mean_center())
        for record in cropped.records:
            non_speaker_boxes.setdefault(record.frame_index, []).append(record.face)

    task = PlacementTask(
        segment=piece,
        box=box,
        shot_id=shot_id,
        speaker=speaker_center,
        speaker_face=speaker_face,
        non_speakers=tuple(non_speakers),
        obstacles=tuple(obstacles),
    )
    return task, (speaker_boxes, non_speaker_boxes)

"""Cascaded speaker selection over candidate tracklets.

Candidates pass through four rejection stages in a fixed order: mouth
motion (absolute floor, then dominance), screen centrality (dominance),
length fit (margin), and audio-visual synchrony (floor). Later, costlier
features are only computed for survivors of the earlier stages.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

STAGE_MSD = "msd"
STAGE_MSD_DOM = "msd_dom"
STAGE_CC = "cc"
STAGE_LC = "lc"
STAGE_AV = "av"
STAGE_NONE = "none"

STAGE_ORDER = (STAGE_MSD, STAGE_MSD_DOM, STAGE_CC, STAGE_LC, STAGE_AV)


@dataclass(frozen=True)
class Thresholds:
    """Cascade thresholds; fields map to config keys theta1..theta5."""

    msd_floor: float = 20.0       # theta1
    msd_dominance: float = 2.5    # theta2
    cc_dominance: float = 2.0     # theta3
    lc_margin: float = 0.1        # theta4
    av_floor: float = 2.0         # theta5

    def __post_init__(self) -> None:
        for name in ("msd_floor", "msd_dominance", "cc_dominance", "lc_margin", "av_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class TrackletFeatures:
    """Feature values for one candidate; later stages stay None when not reached."""

    msd: float
    cc: float | None = None
    lc: float | None = None
    av: float | None = None


@dataclass
class StageTrace:
    stage: str
    survivors: list[int]
    values: dict[int, float]


@dataclass
class SpeakerDecision:
    speaker_id: int | None
    stage: str
    features: dict[int, TrackletFeatures] = field(default_factory=dict)
    trace: list[StageTrace] = field(default_factory=list)
    audio_unavailable: bool = False

    @property
    def has_speaker(self) -> bool:
        return self.speaker_id is not None


@dataclass
class FeatureProviders:
    """Feature evaluators for one segment's candidates.

    `av` is None when no audio evidence exists for the segment; the final
    stage then returns no speaker and flags the decision.
    """

    msd: Callable
    cc: Callable
    lc: Callable
    av: Optional[Callable] = None


def _argmax_id(values: dict[int, float]) -> int:
    """Id with the largest value; ties go to the lowest id."""
    top = max(values.values())
    return min(i for i, v in values.items() if v == top)


def detect_speaker(candidates, providers: FeatureProviders,
                   thresholds: Thresholds | None = None) -> SpeakerDecision:
    """Pick the speaking tracklet among candidates, or none.

    Stage 1 drops candidates with mouth motion below the floor; stage 2
    drops those dominated by the motion maximum; stage 3 drops those
    dominated by the centrality maximum; stage 4 decides by length fit
    when the top two are separated by more than the margin; stage 5
    decides by synchrony when its maximum clears the floor. A stage with
    a single survivor returns immediately. Argmax ties resolve to the
    lowest tracklet id, making the result order-independent.
    """
    th = thresholds or Thresholds()
    decision = SpeakerDecision(speaker_id=None, stage=STAGE_NONE)
    if not candidates:
        return decision
    by_id = {t.id: t for t in sorted(candidates, key=lambda t: t.id)}

    def decide(tracklet_id: int | None, stage: str) -> SpeakerDecision:
        decision.speaker_id = tracklet_id
        decision.stage = stage
        return decision

    msd = {i: float(providers.msd(t)) for i, t in by_id.items()}
    decision.features = {i: TrackletFeatures(msd=v) for i, v in msd.items()}
    s1 = [i for i in by_id if msd[i] >= th.msd_floor]
    decision.trace.append(StageTrace(STAGE_MSD, list(s1), dict(msd)))
    if not s1:
        return decide(None, STAGE_MSD)
    if len(s1) == 1:
        return decide(s1[0], STAGE_MSD)

    top_msd = max(msd[i] for i in s1)
    s2 = [i for i in s1 if msd[i] * th.msd_dominance >= top_msd]
    decision.trace.append(StageTrace(STAGE_MSD_DOM, list(s2), {i: msd[i] for i in s1}))
    if len(s2) == 1:
        return decide(s2[0], STAGE_MSD_DOM)
    if not s2:
        # unreachable: the maximum always dominates itself; kept to mirror
        # the full branch structure
        return decide(None, STAGE_MSD_DOM)

    cc = {i: float(providers.cc(by_id[i])) for i in s2}
    for i, v in cc.items():
        decision.features[i].cc = v
    top_cc = max(cc.values())
    s3 = [i for i in s2 if cc[i] * th.cc_dominance >= top_cc]
    decision.trace.append(StageTrace(STAGE_CC, list(s3), dict(cc)))
    if len(s3) == 1:
        return decide(s3[0], STAGE_CC)
    if not s3:
        # unreachable for the same reason as above
        return decide(None, STAGE_CC)

    lc = {i: float(providers.lc(by_id[i])) for i in s3}
    for i, v in lc.items():
        decision.features[i].lc = v
    ranked = sorted(lc.values(), reverse=True)
    if ranked[0] - ranked[1] > th.lc_margin:
        winner = _argmax_id(lc)
        decision.trace.append(StageTrace(STAGE_LC, [winner], dict(lc)))
        return decide(winner, STAGE_LC)
    decision.trace.append(StageTrace(STAGE_LC, list(s3), dict(lc)))

    if providers.av is None:
        decision.audio_unavailable = True
        decision.trace.append(StageTrace(STAGE_AV, [], {}))
        return decide(None, STAGE_AV)
    av = {i: float(providers.av(by_id[i])) for i in s3}
    for i, v in av.items():
        decision.features[i].av = v
    if max(av.values()) > th.av_floor:
        winner = _argmax_id(av)
        decision.trace.append(StageTrace(STAGE_AV, [winner], dict(av)))
        return decide(winner, STAGE_AV)
    decision.trace.append(StageTrace(STAGE_AV, [], dict(av)))
    return decide(None, STAGE_AV)


def stage_report(decision: SpeakerDecision) -> dict:
    """JSON-ready account of the cascade run: survivors and values per stage."""
    return {
        "speaker": decision.speaker_id,
        "stage": decision.stage,
        "audio_unavailable": decision.audio_unavailable,
        "stages": [
            {
                "stage": t.stage,
                "survivors": t.survivors,
                "values": {str(i): v for i, v in t.values.items()},
            }
            for t in decision.trace
        ],
    }

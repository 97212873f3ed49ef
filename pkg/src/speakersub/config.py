"""Pipeline configuration: every tunable constant, file-loadable.

The config file is flat JSON; unknown keys are rejected so typos fail
loudly. `speakersub inspect` dumps the effective config in the same
format, which closes the round trip.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .placement import FontConfig
from .speaker_detect import Thresholds
from .tracking import AssociationParams


class ConfigError(Exception):
    """Bad configuration file or value."""


@dataclass(frozen=True)
class PipelineConfig:
    # cascade thresholds
    theta1: float = 20.0
    theta2: float = 2.5
    theta3: float = 2.0
    theta4: float = 0.1
    theta5: float = 2.0
    # placement energy weights
    w1: float = 1.0
    w2: float = 1.0
    w3: float = -1.0
    # shot detection
    hist_bins: int = 16
    shot_threshold: float = 0.99
    # tracklet association
    iou_min: float = 0.3
    size_ratio_max: float = 1.5
    appearance_dist_max: float = 60.0
    max_gap: int = 10
    motion_angle_max: float = 45.0
    min_overlap_fraction: float = 0.2
    # segment splitting
    beta: float = 1.0
    min_subsegment: int = 12
    min_display: int = 15
    # geometry and text metrics
    margin: float = 8.0
    pad: float = 4.0
    pad_bottom: float = 10.0
    glyph_w: float = 10.0
    glyph_h: float = 20.0
    font_name: str = "Arial"
    # timing
    frame_rate: float = 25.0

    def __post_init__(self) -> None:
        positive = (
            "theta1", "theta2", "theta3", "theta4", "theta5", "w1",
            "size_ratio_max", "appearance_dist_max", "max_gap",
            "motion_angle_max", "beta", "min_subsegment", "min_display",
            "glyph_w", "glyph_h", "frame_rate",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("margin", "pad", "pad_bottom", "min_overlap_fraction"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 0.0 < self.iou_min <= 1.0:
            raise ConfigError(f"iou_min must be in (0, 1], got {self.iou_min}")
        if not 0.0 < self.shot_threshold <= 1.0:
            raise ConfigError(f"shot_threshold must be in (0, 1], got {self.shot_threshold}")
        if self.hist_bins <= 0 or 256 % self.hist_bins != 0:
            raise ConfigError(f"hist_bins must divide 256, got {self.hist_bins}")

    def thresholds(self) -> Thresholds:
        return Thresholds(
            msd_floor=self.theta1,
            msd_dominance=self.theta2,
            cc_dominance=self.theta3,
            lc_margin=self.theta4,
            av_floor=self.theta5,
        )

    def association(self) -> AssociationParams:
        return AssociationParams(
            iou_min=self.iou_min,
            size_ratio_max=self.size_ratio_max,
            appearance_dist_max=self.appearance_dist_max,
            max_gap=self.max_gap,
            motion_angle_max=self.motion_angle_max,
            min_overlap_fraction=self.min_overlap_fraction,
        )

    def font(self) -> FontConfig:
        return FontConfig(glyph_w=self.glyph_w, glyph_h=self.glyph_h, pad=self.pad)

    @property
    def weights(self) -> tuple[float, float, float]:
        return (self.w1, self.w2, self.w3)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


_FIELDS = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}
_INT_FIELDS = {"hist_bins", "max_gap", "min_subsegment", "min_display"}
_STR_FIELDS = {"font_name"}


def _coerce(key: str, value):
    if key in _STR_FIELDS:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    if key in _INT_FIELDS:
        if int(value) != value:
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def config_from_dict(data: dict) -> PipelineConfig:
    unknown = data.keys() - _FIELDS.keys()
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return PipelineConfig(**{k: _coerce(k, v) for k, v in data.items()})


def load_config(path: str | Path | None = None,
                overrides: dict | None = None) -> PipelineConfig:
    """Build a config from an optional JSON file plus key=value overrides."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
    if overrides:
        data.update(overrides)
    return config_from_dict(data)


def parse_override(text: str):
    """Parse one `key=value` command-line override."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    if key in _STR_FIELDS:
        return key, raw
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc

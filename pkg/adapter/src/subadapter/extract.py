"""Turn a video file into the speakersub input bundle.

Outputs land in one directory: numbered PNG frames, a newline-delimited
detection file, a per-frame audio energy CSV (when audio is available),
and a manifest with frame rate and dimensions.
"""

from __future__ import annotations

import json
import math
import sys
import wave
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from .detect import heuristic_detector


class NoVideoStream(Exception):
    """The input has no readable video frames."""


class NoAudioStream(Exception):
    """No audio track or sidecar WAV was found."""


@dataclass(frozen=True)
class AdapterOutputBundle:
    out_dir: Path
    frames_dir: Path
    detections_path: Path
    audio_path: Path | None
    manifest_path: Path
    frame_count: int
    frame_rate: float
    width: int
    height: int


def _record_json(frame_index, obs):
    return json.dumps({
        "frame": frame_index,
        "face": [obs.x, obs.y, obs.w, obs.h],
        "landmarks": [[px, py] for px, py in obs.landmarks] if obs.landmarks else None,
        "confidence": obs.confidence,
    })


def _rms_per_frame(samples: np.ndarray, sample_rate: int, frame_rate: float,
                   frame_count: int) -> np.ndarray:
    """RMS over sample windows aligned to output frames; padded with zeros."""
    window = sample_rate / frame_rate
    values = np.zeros(frame_count)
    total = samples.size
    for i in range(frame_count):
        lo = math.floor(i * window)
        hi = min(math.floor((i + 1) * window), total)
        if i == frame_count - 1:
            hi = total
        if hi > lo:
            chunk = samples[lo:hi].astype(np.float64)
            values[i] = math.sqrt(float(np.mean(chunk * chunk)))
    return values


def _load_sidecar_audio(video_path: Path, explicit: Path | None) -> tuple[np.ndarray, int]:
    candidates = [explicit] if explicit else [video_path.with_suffix(".wav")]
    for candidate in candidates:
        if candidate and candidate.is_file():
            with wave.open(str(candidate), "rb") as wav:
                if wav.getnchannels() != 1 or wav.getsampwidth() != 2:
                    raise NoAudioStream(
                        f"{candidate}: need 16-bit mono PCM, got "
                        f"{wav.getnchannels()}ch {8 * wav.getsampwidth()}-bit"
                    )
                raw = wav.readframes(wav.getnframes())
                return np.frombuffer(raw, dtype="<i2"), wav.getframerate()
    raise NoAudioStream(f"no audio track decoder and no sidecar WAV for {video_path}")


def extract_bundle(video_path, out_dir, stride: int = 1, detector=None,
                   audio_path=None) -> AdapterOutputBundle:
    """Extract frames, detections, and audio energy from a video.

    Every `stride`-th frame is written as `frame_%06d.png` with indices
    contiguous from 0. The detector (default: the model-free heuristic)
    runs on each kept frame; records go to `detections.jsonl` in the
    consumer's schema. Audio comes from a sidecar WAV next to the video
    (or `audio_path`); when none exists the energy CSV is skipped with a
    warning rather than failing the extraction.
    """
    video_path = Path(video_path)
    out_dir = Path(out_dir)
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    detector = detector or heuristic_detector()

    capture = cv2.VideoCapture(str(video_path))
    if not capture.isOpened():
        raise NoVideoStream(f"cannot open video: {video_path}")
    source_fps = capture.get(cv2.CAP_PROP_FPS)
    if not source_fps or source_fps <= 0 or math.isnan(source_fps):
        source_fps = 25.0
    frame_rate = source_fps / stride

    frames_dir = out_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    records: list[str] = []
    out_index = 0
    source_index = 0
    width = height = 0
    while True:
        ok, bgr = capture.read()
        if not ok:
            break
        if source_index % stride == 0:
            rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
            height, width = rgb.shape[:2]
            Image.fromarray(rgb).save(frames_dir / f"frame_{out_index:06d}.png")
            for obs in detector(rgb):
                records.append(_record_json(out_index, obs))
            out_index += 1
        source_index += 1
    capture.release()
    if out_index == 0:
        raise NoVideoStream(f"no decodable frames in {video_path}")

    detections_path = out_dir / "detections.jsonl"
    tmp = detections_path.with_suffix(".jsonl.tmp")
    tmp.write_text("".join(line + "\n" for line in records), encoding="utf-8")
    tmp.replace(detections_path)

    energy_path: Path | None = out_dir / "audio.csv"
    try:
        samples, sample_rate = _load_sidecar_audio(
            video_path, Path(audio_path) if audio_path else None
        )
        values = _rms_per_frame(samples, sample_rate, frame_rate, out_index)
        tmp = energy_path.with_suffix(".csv.tmp")
        tmp.write_text("".join(f"{v:.6f}\n" for v in values), encoding="utf-8")
        tmp.replace(energy_path)
    except NoAudioStream as exc:
        print(f"warning: {exc}; omitting audio energy CSV", file=sys.stderr)
        energy_path = None

    manifest_path = out_dir / "manifest.json"
    manifest = {
        "source": video_path.name,
        "stride": stride,
        "frame_rate": frame_rate,
        "width": width,
        "height": height,
        "frames": out_index,
        "detections": len(records),
        "audio": energy_path.name if energy_path else None,
    }
    tmp = manifest_path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    tmp.replace(manifest_path)

    return AdapterOutputBundle(
        out_dir=out_dir,
        frames_dir=frames_dir,
        detections_path=detections_path,
        audio_path=energy_path,
        manifest_path=manifest_path,
        frame_count=out_index,
        frame_rate=frame_rate,
        width=width,
        height=height,
    )

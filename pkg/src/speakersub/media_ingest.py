"""Frame, detection, histogram, and audio-energy ingestion.

Faces and landmarks come from an external detector via a newline-delimited
record file (one JSON object per line); frames come from a directory of
numbered images. Nothing here runs a detector or decodes video containers.
"""

from __future__ import annotations

import json
import math
import re
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


class MediaError(Exception):
    """Base class for media ingestion errors."""


class MissingFrame(MediaError):
    """A gap in the numbered frame files."""


class DimensionMismatch(MediaError):
    """A frame's dimensions differ from the rest of the sequence."""


class SchemaError(MediaError):
    """A detection record failed validation."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class BadBinCount(MediaError):
    """Histogram bin count does not divide 256."""


class DegenerateHistogram(MediaError):
    """Correlation is undefined for a constant histogram vector."""


class EmptyAudio(MediaError):
    """No audio samples to analyze."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box; x, y is the top-left corner."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive size, got {self.w}x{self.h}")

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def iou(self, other: "BBox") -> float:
        ix = min(self.right, other.right) - max(self.x, other.x)
        iy = min(self.bottom, other.bottom) - max(self.y, other.y)
        if ix <= 0 or iy <= 0:
            return 0.0
        inter = ix * iy
        return inter / (self.area + other.area - inter)

    def intersects(self, other: "BBox") -> bool:
        return (
            min(self.right, other.right) > max(self.x, other.x)
            and min(self.bottom, other.bottom) > max(self.y, other.y)
        )

    def expanded(self, factor: float) -> "BBox":
        cx, cy = self.center
        w, h = self.w * factor, self.h * factor
        return BBox(cx - w / 2.0, cy - h / 2.0, w, h)

    def clipped(self, width: float, height: float) -> "BBox | None":
        """Intersect with the frame; None when nothing remains."""
        x0, y0 = max(self.x, 0.0), max(self.y, 0.0)
        x1, y1 = min(self.right, float(width)), min(self.bottom, float(height))
        if x1 <= x0 or y1 <= y0:
            return None
        return BBox(x0, y0, x1 - x0, y1 - y0)

    def contains_point(self, x: float, y: float) -> bool:
        return self.x <= x <= self.right and self.y <= y <= self.bottom


def luma_rec601(rgb: np.ndarray) -> np.ndarray:
    """Rec.601 luminance, rounded half up to 8 bits."""
    y = (
        0.299 * rgb[..., 0].astype(np.float64)
        + 0.587 * rgb[..., 1].astype(np.float64)
        + 0.114 * rgb[..., 2].astype(np.float64)
    )
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class Frame:
    """One decoded video frame with both color and luminance planes."""

    index: int
    rgb: np.ndarray
    gray: np.ndarray

    def __post_init__(self) -> None:
        if self.rgb.ndim != 3 or self.rgb.shape[2] != 3:
            raise ValueError(f"rgb plane must be HxWx3, got {self.rgb.shape}")
        if self.gray.shape != self.rgb.shape[:2]:
            raise ValueError("gray plane does not match rgb dimensions")

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def height(self) -> int:
        return self.rgb.shape[0]


def frame_from_rgb(index: int, rgb: np.ndarray) -> Frame:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    return Frame(index=index, rgb=rgb, gray=luma_rec601(rgb))


def frame_from_gray(index: int, gray: np.ndarray) -> Frame:
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    return Frame(index=index, rgb=np.repeat(gray[:, :, None], 3, axis=2), gray=gray)


_FRAME_FILE_RE = re.compile(r"^frame_(\d+)\.(png|pgm|ppm)$")


class FrameSequence:
    """Lazy, index-addressable access to a directory of numbered frames.

    Frames must be numbered contiguously from zero and share dimensions.
    Not safe to share across concurrent consumers.
    """

    _CACHE_SIZE = 64

    def __init__(self, paths: list[Path]):
        self._paths = paths
        self._cache: dict[int, Frame] = {}
        self._dims: tuple[int, int] | None = None

    def __len__(self) -> int:
        return len(self._paths)

    def __iter__(self):
        for i in range(len(self._paths)):
            yield self[i]

    def __getitem__(self, index: int) -> Frame:
        if not 0 <= index < len(self._paths):
            raise IndexError(index)
        frame = self._cache.get(index)
        if frame is None:
            frame = self._load(index)
            if len(self._cache) >= self._CACHE_SIZE:
                self._cache.pop(next(iter(self._cache)))
            self._cache[index] = frame
        return frame

    @property
    def width(self) -> int:
        return self[0].width

    @property
    def height(self) -> int:
        return self[0].height

    def _load(self, index: int) -> Frame:
        with Image.open(self._paths[index]) as img:
            if img.mode == "L":
                frame = frame_from_gray(index, np.asarray(img))
            else:
                frame = frame_from_rgb(index, np.asarray(img.convert("RGB")))
        if self._dims is None:
            self._dims = (frame.width, frame.height)
        elif (frame.width, frame.height) != self._dims:
            raise DimensionMismatch(
                f"frame {index} is {frame.width}x{frame.height}, "
                f"expected {self._dims[0]}x{self._dims[1]}"
            )
        return frame


def open_frame_sequence(directory: str | Path, pattern: str | None = None) -> FrameSequence:
    """Open a directory of frames named `frame_%06d.{png,pgm,ppm}`.

    `pattern` may override the filename template (printf-style, e.g.
    `img_%04d.png`); by default any zero-padded `frame_NNNNNN` file is
    accepted. Numbering must be contiguous from 0.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise MediaError(f"not a directory: {directory}")

    if pattern is None:
        file_re = _FRAME_FILE_RE
    else:
        m = re.match(r"^(.*)%0?(\d*)d(.*)$", pattern)
        if m is None:
            raise MediaError(f"pattern must contain one %d field: {pattern!r}")
        file_re = re.compile(re.escape(m.group(1)) + r"(\d+)" + re.escape(m.group(3)) + "$")
    by_index: dict[int, Path] = {}
    for p in sorted(directory.iterdir()):
        match = file_re.match(p.name)
        if match:
            by_index.setdefault(int(match.group(1)), p)

    if not by_index:
        raise MediaError(f"no frame files found in {directory}")
    top = max(by_index)
    missing = [i for i in range(top + 1) if i not in by_index]
    if missing:
        raise MissingFrame(f"frame {missing[0]} missing from {directory}")
    return FrameSequence([by_index[i] for i in range(top + 1)])


@dataclass(frozen=True)
class DetectionRecord:
    """One detected face in one frame.

    When landmarks are present, the first two points are the left and right
    mouth corners; any further points outline the lower face and feed
    motion-region prediction.
    """

    frame_index: int
    face: BBox
    landmarks: tuple[tuple[float, float], ...] | None
    confidence: float

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValueError(f"negative frame index {self.frame_index}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.landmarks is not None:
            object.__setattr__(
                self, "landmarks", tuple((float(x), float(y)) for x, y in self.landmarks)
            )
            bounds = self.face.expanded(1.2)
            for x, y in self.landmarks[:2]:
                if not bounds.contains_point(x, y):
                    raise ValueError(
                        f"mouth corner ({x}, {y}) outside 20% expansion of face"
                    )

    @property
    def mouth_corners(self) -> tuple[tuple[float, float], tuple[float, float]] | None:
        if self.landmarks is not None and len(self.landmarks) >= 2:
            return (self.landmarks[0], self.landmarks[1])
        return None


def _record_from_obj(obj, line: int) -> DetectionRecord:
    if not isinstance(obj, dict):
        raise SchemaError(line, "record is not an object")
    missing = {"frame", "face", "landmarks", "confidence"} - obj.keys()
    if missing:
        raise SchemaError(line, f"missing keys: {sorted(missing)}")
    extra = obj.keys() - {"frame", "face", "landmarks", "confidence"}
    if extra:
        raise SchemaError(line, f"unknown keys: {sorted(extra)}")
    frame = obj["frame"]
    if not isinstance(frame, int) or isinstance(frame, bool):
        raise SchemaError(line, f"frame must be an integer, got {frame!r}")
    face = obj["face"]
    if not (isinstance(face, list) and len(face) == 4
            and all(isinstance(v, (int, float)) for v in face)):
        raise SchemaError(line, f"face must be [x, y, w, h], got {face!r}")
    landmarks = obj["landmarks"]
    if landmarks is not None:
        ok = isinstance(landmarks, list) and all(
            isinstance(p, list) and len(p) == 2
            and all(isinstance(v, (int, float)) for v in p)
            for p in landmarks
        )
        if not ok:
            raise SchemaError(line, "landmarks must be null or a list of [x, y] pairs")
        landmarks = tuple((float(x), float(y)) for x, y in landmarks)
    confidence = obj["confidence"]
    if not isinstance(confidence, (int, float)) or isinstance(confidence, bool):
        raise SchemaError(line, f"confidence must be a number, got {confidence!r}")
    try:
        return DetectionRecord(
            frame_index=frame,
            face=BBox(*(float(v) for v in face)),
            landmarks=landmarks,
            confidence=float(confidence),
        )
    except ValueError as exc:
        raise SchemaError(line, str(exc)) from exc


def read_detections(path: str | Path) -> list[DetectionRecord]:
    """Read newline-delimited detection records, sorted by (frame, x)."""
    records: list[DetectionRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(line_no, f"invalid JSON: {exc.msg}") from exc
            records.append(_record_from_obj(obj, line_no))
    records.sort(key=lambda r: (r.frame_index, r.face.x, r.face.y))
    return records


def detection_to_json(record: DetectionRecord) -> str:
    obj = {
        "frame": record.frame_index,
        "face": [record.face.x, record.face.y, record.face.w, record.face.h],
        "landmarks": [list(p) for p in record.landmarks] if record.landmarks else None,
        "confidence": record.confidence,
    }
    return json.dumps(obj)


def write_detections(records, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(detection_to_json(record) + "\n")


@dataclass(frozen=True)
class Histogram:
    """Per-channel bin counts over one frame's RGB values."""

    bins_per_channel: int
    counts: np.ndarray  # shape (3, bins_per_channel), int64

    @property
    def flat(self) -> np.ndarray:
        return self.counts.reshape(-1)


def rgb_histogram(frame: Frame, bins_per_channel: int = 16) -> Histogram:
    """Histogram each channel into equal-width bins of 256/B values."""
    if bins_per_channel <= 0 or 256 % bins_per_channel != 0:
        raise BadBinCount(f"bins_per_channel must divide 256, got {bins_per_channel}")
    width = 256 // bins_per_channel
    counts = np.stack([
        np.bincount(frame.rgb[:, :, c].reshape(-1) // width, minlength=bins_per_channel)
        for c in range(3)
    ]).astype(np.int64)
    return Histogram(bins_per_channel=bins_per_channel, counts=counts)


def histogram_similarity(h1: Histogram, h2: Histogram) -> float:
    """Pearson correlation over the concatenated per-channel bin counts."""
    if h1.bins_per_channel != h2.bins_per_channel:
        raise ValueError("histograms have different bin structure")
    v1 = h1.flat.astype(np.float64)
    v2 = h2.flat.astype(np.float64)
    if v1.max() == v1.min() or v2.max() == v2.min():
        raise DegenerateHistogram("constant histogram vector")
    if np.array_equal(v1, v2):
        return 1.0
    d1 = v1 - v1.mean()
    d2 = v2 - v2.mean()
    return float((d1 @ d2) / math.sqrt((d1 @ d1) * (d2 @ d2)))


@dataclass(frozen=True)
class AudioEnergySeries:
    """One non-negative energy value per video frame."""

    values: np.ndarray
    frame_rate: float

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if np.any(values < 0):
            raise ValueError("audio energy values must be non-negative")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


def audio_energy_from_pcm(samples, sample_rate: int, frame_rate: float) -> AudioEnergySeries:
    """Per-video-frame RMS of a 16-bit mono PCM stream.

    Window i covers samples [floor(i*win), floor((i+1)*win)) with
    win = sample_rate / frame_rate; the last partial window is included.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise EmptyAudio("no samples")
    if sample_rate < 8000:
        raise ValueError(f"sample_rate must be >= 8000, got {sample_rate}")
    if frame_rate <= 0:
        raise ValueError(f"frame_rate must be positive, got {frame_rate}")
    window = sample_rate / frame_rate
    n = math.ceil(samples.size / window)
    values = np.zeros(n)
    for i in range(n):
        lo = math.floor(i * window)
        hi = samples.size if i == n - 1 else min(math.floor((i + 1) * window), samples.size)
        if hi > lo:
            chunk = samples[lo:hi]
            values[i] = math.sqrt(float(np.mean(chunk * chunk)))
    return AudioEnergySeries(values=values, frame_rate=frame_rate)


def read_audio_energy(path: str | Path, frame_rate: float) -> AudioEnergySeries:
    """Load audio energy from a 16-bit mono PCM WAV or a one-value-per-frame CSV."""
    path = Path(path)
    if path.suffix.lower() == ".wav":
        with wave.open(str(path), "rb") as wav:
            if wav.getnchannels() != 1:
                raise MediaError(f"{path}: expected mono audio, got {wav.getnchannels()} channels")
            if wav.getsampwidth() != 2:
                raise MediaError(f"{path}: expected 16-bit PCM, got {8 * wav.getsampwidth()}-bit")
            raw = wav.readframes(wav.getnframes())
            sample_rate = wav.getframerate()
        samples = np.frombuffer(raw, dtype="<i2")
        return audio_energy_from_pcm(samples, sample_rate, frame_rate)
    values = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise MediaError(f"{path}:{line_no}: not a number: {line!r}") from exc
    if not values:
        raise EmptyAudio(f"no values in {path}")
    return AudioEnergySeries(values=np.asarray(values), frame_rate=frame_rate)


def derive_clothing_box(face: BBox, frame_width: int, frame_height: int) -> BBox | None:
    """Clothing area under a face: 2w wide by 1.5w tall, hung 0.2h below it.

    Horizontally centered on the face; clipped to the frame. Returns None
    when the clipped box is empty (face at the frame bottom).
    """
    w = 2.0 * face.w
    h = 1.5 * face.w
    x = face.x + face.w / 2.0 - w / 2.0
    y = face.y + face.h + 0.2 * face.h
    return BBox(x, y, w, h).clipped(frame_width, frame_height)


def pixel_rect(box: BBox, width: int, height: int) -> tuple[int, int, int, int] | None:
    """Integer pixel bounds (x0, y0, x1, y1) of a box clipped to the frame."""
    x0 = max(int(math.floor(box.x)), 0)
    y0 = max(int(math.floor(box.y)), 0)
    x1 = min(int(math.ceil(box.right)), width)
    y1 = min(int(math.ceil(box.bottom)), height)
    if x1 <= x0 or y1 <= y0:
        return None
    return x0, y0, x1, y1


def mean_rgb(frame: Frame, box: BBox) -> np.ndarray | None:
    """Mean RGB over a box's pixels, or None when the box misses the frame."""
    rect = pixel_rect(box, frame.width, frame.height)
    if rect is None:
        return None
    x0, y0, x1, y1 = rect
    return frame.rgb[y0:y1, x0:x1].reshape(-1, 3).mean(axis=0)

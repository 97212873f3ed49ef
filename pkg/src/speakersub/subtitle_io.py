"""SRT subtitle parsing, serialization, and per-speaker turn splitting.

Parsing is strict: structural problems raise instead of silently dropping
or reordering segments, because downstream timing refinement relies on the
file's intervals being disjoint and in order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class SrtError(Exception):
    """Base class for subtitle file errors."""


class EmptyFile(SrtError):
    """The document contains no subtitle blocks."""


class MalformedTimecode(SrtError):
    """A timing line does not match `HH:MM:SS,mmm --> HH:MM:SS,mmm`."""


class NonMonotonicIndex(SrtError):
    """Segment indices are not strictly increasing."""


class OverlapError(SrtError):
    """Segment intervals overlap or run backwards in file order."""


class InvariantViolation(SrtError):
    """A segment violates the subtitle data model."""


_TIMING_RE = re.compile(
    r"^(\d{2,}):(\d{2}):(\d{2}),(\d{3})\s*-->\s*(\d{2,}):(\d{2}):(\d{2}),(\d{3})$"
)


@dataclass(frozen=True, order=True)
class TimeCode:
    """A point in time as non-negative integer milliseconds since video start."""

    millis: int

    def __post_init__(self) -> None:
        if self.millis < 0:
            raise InvariantViolation(f"negative timecode: {self.millis}")

    @property
    def seconds(self) -> float:
        return self.millis / 1000.0

    def __str__(self) -> str:
        secs, ms = divmod(self.millis, 1000)
        mins, s = divmod(secs, 60)
        h, m = divmod(mins, 60)
        return f"{h:02d}:{m:02d}:{s:02d},{ms:03d}"


@dataclass(frozen=True)
class SubtitleSegment:
    """One indexed, timed block of subtitle text."""

    index: int
    start: TimeCode
    end: TimeCode
    lines: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.index < 1:
            raise InvariantViolation(f"segment index must be positive, got {self.index}")
        if not self.start < self.end:
            raise InvariantViolation(
                f"segment {self.index}: start {self.start} is not before end {self.end}"
            )
        if not self.lines or any(not line.strip() for line in self.lines):
            raise InvariantViolation(f"segment {self.index}: blank or missing text lines")
        object.__setattr__(self, "lines", tuple(self.lines))

    @property
    def text(self) -> str:
        return "\n".join(self.lines)


@dataclass(frozen=True)
class SpeakerTurn:
    """The lines spoken by one speaker within a segment."""

    lines: tuple[str, ...]
    turn_index: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "lines", tuple(self.lines))


def _parse_timing(line: str, block_no: int) -> tuple[TimeCode, TimeCode]:
    m = _TIMING_RE.match(line.strip())
    if m is None:
        raise MalformedTimecode(f"block {block_no}: bad timing line {line!r}")
    h1, m1, s1, ms1, h2, m2, s2, ms2 = (int(g) for g in m.groups())
    if m1 >= 60 or m2 >= 60 or s1 >= 60 or s2 >= 60:
        raise MalformedTimecode(f"block {block_no}: out-of-range field in {line!r}")
    start = TimeCode(((h1 * 60 + m1) * 60 + s1) * 1000 + ms1)
    end = TimeCode(((h2 * 60 + m2) * 60 + s2) * 1000 + ms2)
    return start, end


def _iter_blocks(text: str):
    block: list[str] = []
    for line in text.split("\n"):
        if line.strip() == "":
            if block:
                yield block
                block = []
        else:
            block.append(line)
    if block:
        yield block


def parse_srt(text: str) -> list[SubtitleSegment]:
    """Parse an SRT document into segments.

    Tolerates a UTF-8 BOM and both LF and CRLF line endings. Raises on
    structural defects rather than repairing them: bad timing lines,
    non-increasing indices, or overlapping intervals are all errors.
    """
    text = text.lstrip("﻿").replace("\r\n", "\n").replace("\r", "\n")
    if text.strip() == "":
        raise EmptyFile("no subtitle blocks in document")

    segments: list[SubtitleSegment] = []
    for block_no, block in enumerate(_iter_blocks(text), start=1):
        if len(block) < 3:
            raise SrtError(f"block {block_no}: expected index, timing and text lines")
        index_line = block[0].strip()
        if not index_line.isdigit():
            raise SrtError(f"block {block_no}: bad segment index {index_line!r}")
        index = int(index_line)
        start, end = _parse_timing(block[1], block_no)
        try:
            segment = SubtitleSegment(index=index, start=start, end=end, lines=tuple(block[2:]))
        except InvariantViolation as exc:
            raise SrtError(f"block {block_no}: {exc}") from exc

        if segments:
            prev = segments[-1]
            if segment.index <= prev.index:
                raise NonMonotonicIndex(
                    f"segment index {segment.index} after {prev.index}"
                )
            if segment.start < prev.end:
                raise OverlapError(
                    f"segment {segment.index} starts at {segment.start} "
                    f"before segment {prev.index} ends at {prev.end}"
                )
        segments.append(segment)
    return segments


def serialize_srt(segments: list[SubtitleSegment]) -> str:
    """Serialize segments to an SRT document with LF endings.

    The output round-trips: ``parse_srt(serialize_srt(s)) == s``.
    """
    if not segments:
        raise InvariantViolation("cannot serialize an empty segment list")
    for prev, cur in zip(segments, segments[1:]):
        if cur.index <= prev.index:
            raise InvariantViolation(f"indices not increasing: {prev.index} -> {cur.index}")
        if cur.start < prev.end:
            raise InvariantViolation(f"segments {prev.index} and {cur.index} overlap")
    parts = []
    for seg in segments:
        parts.append(f"{seg.index}\n{seg.start} --> {seg.end}\n" + "\n".join(seg.lines) + "\n\n")
    return "".join(parts)


def _strip_turn_marker(line: str) -> str:
    content = line.lstrip()[1:]
    if content.startswith(" "):
        content = content[1:]
    return content


def split_speaker_turns(segment: SubtitleSegment) -> list[SpeakerTurn]:
    """Split a segment into per-speaker turns at line-initial `-` markers.

    Every line whose first non-whitespace character is `-` opens a new turn;
    the marker and one following space are removed. A segment with no marked
    lines yields a single turn holding all lines. A `-` in the middle of a
    line never splits.
    """
    groups: list[list[str]] = []
    for line in segment.lines:
        if line.lstrip().startswith("-"):
            groups.append([_strip_turn_marker(line)])
        elif groups:
            groups[-1].append(line)
        else:
            groups.append([line])
    return [SpeakerTurn(lines=tuple(lines), turn_index=i) for i, lines in enumerate(groups)]


def word_count(lines) -> int:
    """Whitespace-token count over a collection of text lines."""
    return sum(len(line.split()) for line in lines)

"""Command-line interface.

Subcommands: `place` runs the full pipeline and writes the positioned ASS
plus a report; `detect` stops after speaker detection; `shots` prints the
cut list; `inspect` dumps the effective configuration.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, load_config, parse_override
from .media_ingest import MediaError, open_frame_sequence, read_audio_energy, read_detections
from .pipeline import analyze
from .placement import TextTooWide
from .render_out import AssStyle, annotate_frames, emit_ass, emit_report
from .segmentation import detect_shot_changes
from .subtitle_io import SrtError, parse_srt
from .tracking import dump_tracklets, load_tracklets

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTERNAL = 3


class InputError(Exception):
    """Any problem with the inputs the user handed us."""


def _write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _add_common(parser: argparse.ArgumentParser, *, srt=False, frames=False,
                detections=False, audio=False) -> None:
    if srt:
        parser.add_argument("--srt", required=True, help="input SRT subtitle file")
    if frames:
        parser.add_argument("--frames", required=True, help="directory of numbered frame images")
    if detections:
        parser.add_argument("--detections", required=True,
                            help="newline-delimited face detection records")
    if audio:
        parser.add_argument("--audio", help="16-bit mono WAV or per-frame energy CSV")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="speakersub",
        description="Place subtitles next to their on-screen speakers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("place", help="full pipeline: detection, splitting, placement")
    _add_common(p, srt=True, frames=True, detections=True, audio=True)
    p.add_argument("--out-ass", required=True, help="output ASS subtitle file")
    p.add_argument("--out-report", required=True, help="output placement report (JSONL)")
    p.add_argument("--annotate", metavar="DIR", help="also write annotated debug frames")
    p.add_argument("--tracklets", help="use precomputed tracklets instead of associating")
    p.add_argument("--dump-tracklets", metavar="PATH", help="dump the tracklets used")

    p = sub.add_parser("detect", help="speaker detection only, report to stdout or file")
    _add_common(p, srt=True, frames=True, detections=True, audio=True)
    p.add_argument("--out-report", help="output report path (default stdout)")
    p.add_argument("--tracklets", help="use precomputed tracklets instead of associating")

    p = sub.add_parser("shots", help="print the shot cut list as CSV")
    _add_common(p, frames=True)

    p = sub.add_parser("inspect", help="dump the effective configuration")
    _add_common(p)
    return parser


def _config_from_args(args) -> "PipelineConfig":
    overrides = dict(parse_override(item) for item in args.overrides)
    if args.config and not Path(args.config).is_file():
        raise InputError(f"config file not found: {args.config}")
    return load_config(args.config, overrides)


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} not found: {path}")
    return p


def _load_inputs(args, cfg):
    srt_path = _require_file(args.srt, "SRT file")
    try:
        text = srt_path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"{args.srt}: not valid UTF-8: {exc}") from exc
    segments = parse_srt(text)
    frames = open_frame_sequence(args.frames)
    detections = read_detections(_require_file(args.detections, "detections file"))
    if detections and detections[-1].frame_index >= len(frames):
        raise InputError(
            f"detection at frame {detections[-1].frame_index} but only "
            f"{len(frames)} frames exist"
        )
    audio = None
    if args.audio:
        audio = read_audio_energy(_require_file(args.audio, "audio file"), cfg.frame_rate)
    tracklets = None
    if getattr(args, "tracklets", None):
        tracklets = load_tracklets(_require_file(args.tracklets, "tracklets file"))
    return segments, frames, detections, audio, tracklets


def _cmd_place(args) -> int:
    cfg = _config_from_args(args)
    segments, frames, detections, audio, tracklets = _load_inputs(args, cfg)
    result = analyze(segments, frames, detections, audio, cfg, tracklets=tracklets)
    ass_text = emit_ass(
        result.placements, result.screen, cfg.frame_rate,
        AssStyle(font_name=cfg.font_name, font_size=int(cfg.glyph_h)),
    )
    report_text = emit_report(result.report_items, cfg.weights)
    _write_atomic(args.out_ass, ass_text)
    _write_atomic(args.out_report, report_text)
    if args.dump_tracklets:
        dump_tracklets(result.tracklets, args.dump_tracklets)
    if args.annotate:
        count = annotate_frames(frames, result.annotate_items, args.annotate)
        print(f"wrote {count} annotated frames to {args.annotate}")
    return EXIT_OK


def _cmd_detect(args) -> int:
    cfg = _config_from_args(args)
    segments, frames, detections, audio, tracklets = _load_inputs(args, cfg)
    result = analyze(segments, frames, detections, audio, cfg, tracklets=tracklets)
    report_text = emit_report(result.report_items, cfg.weights, include_placement=False)
    if args.out_report:
        _write_atomic(args.out_report, report_text)
    else:
        sys.stdout.write(report_text)
    return EXIT_OK


def _cmd_shots(args) -> int:
    cfg = _config_from_args(args)
    frames = open_frame_sequence(args.frames)
    cuts = detect_shot_changes(frames, cfg.hist_bins, cfg.shot_threshold)
    print("frame_index,delta")
    for cut in cuts:
        print(f"{cut.frame_index},{cut.similarity:.6f}")
    return EXIT_OK


def _cmd_inspect(args) -> int:
    cfg = _config_from_args(args)
    sys.stdout.write(cfg.dumps())
    return EXIT_OK


_COMMANDS = {
    "place": _cmd_place,
    "detect": _cmd_detect,
    "shots": _cmd_shots,
    "inspect": _cmd_inspect,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (InputError, ConfigError, SrtError, MediaError, TextTooWide) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - surfaced as an internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry: `subadapter extract --video V --out DIR [--stride N]`."""

from __future__ import annotations

import argparse
import json
import sys

from .detect import heuristic_detector, yunet_detector
from .extract import NoVideoStream, extract_bundle


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subadapter",
        description="Extract frames, face detections, and audio energy from a video.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="produce a speakersub input bundle")
    p.add_argument("--video", required=True, help="input video file")
    p.add_argument("--out", required=True, help="output bundle directory")
    p.add_argument("--stride", type=int, default=1, help="keep every Nth frame")
    p.add_argument("--audio", help="sidecar WAV (default: <video>.wav if present)")
    p.add_argument("--yunet-model", help="ONNX model path to use the YuNet detector")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    detector = None
    if args.yunet_model:
        detector = yunet_detector(args.yunet_model)
    else:
        detector = heuristic_detector()
    try:
        bundle = extract_bundle(args.video, args.out, stride=args.stride,
                                detector=detector, audio_path=args.audio)
    except (NoVideoStream, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({
        "frames": bundle.frame_count,
        "frame_rate": bundle.frame_rate,
        "size": [bundle.width, bundle.height],
        "detections": str(bundle.detections_path),
        "audio": str(bundle.audio_path) if bundle.audio_path else None,
    }))
    return 0


if __name__ == "__main__":
    sys.exit(main())

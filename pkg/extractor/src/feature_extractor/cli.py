"""Standalone command-line entry point for batch feature extraction."""

from __future__ import annotations

import argparse
import logging
import sys

from . import ExtractionError
from .extract import ExtractConfig, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="storyline-extract",
        description="Dump per-frame image-network embeddings of videos into "
                    "the canonical feature-matrix format.")
    parser.add_argument("videos", nargs="+", help="input video files")
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--fps", type=float, default=1.0,
                        help="sampling rate in frames per second (default 1)")
    parser.add_argument("--arch", default="alexnet")
    parser.add_argument("--layer", default="classifier.6",
                        help="embedding layer name (default: the 1000-wide logits)")
    parser.add_argument("--weights", default="none",
                        help="checkpoint path, or 'none' for seeded random init")
    parser.add_argument("--d", type=int, default=1000,
                        help="expected layer width (default 1000)")
    parser.add_argument("--split", choices=("train", "test"), default="test")
    parser.add_argument("--csv", action="store_true", help="write CSV instead of binary")
    parser.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    cfg = ExtractConfig(videos=tuple(args.videos), out_dir=args.out, fps=args.fps,
                        arch=args.arch, layer=args.layer, weights=args.weights,
                        d=args.d, split=args.split, csv=args.csv, seed=args.seed)
    try:
        result = extract(cfg)
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(result.written)} feature files to {args.out}")
    for video, reason in result.skipped:
        print(f"skipped {video}: {reason}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())

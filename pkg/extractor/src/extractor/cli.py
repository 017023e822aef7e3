"""`extract` command line entry point."""

from __future__ import annotations

import argparse
import sys

from .architectures import ARCHITECTURES
from .pipeline import ExtractorConfig, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Export a CBIR embedding store from a directory of images "
        "whose immediate subdirectories are category names.",
    )
    parser.add_argument("--arch", default="inceptionresnetv2",
                        choices=sorted(ARCHITECTURES), help="network architecture")
    parser.add_argument("--images", required=True, help="image root directory")
    parser.add_argument("--out", required=True, help="store directory to write")
    parser.add_argument("--batch", type=int, default=32, help="inference batch size")
    parser.add_argument("--weights", choices=["imagenet", "none"], default="imagenet",
                        help="'none' uses random initialization (offline smoke runs)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = ExtractorConfig(
        architecture=args.arch,
        image_root=args.images,
        batch_size=args.batch,
        output=args.out,
        weights=None if args.weights == "none" else args.weights,
    )
    try:
        extract(config)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

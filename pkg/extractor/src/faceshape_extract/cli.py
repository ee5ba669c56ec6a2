"""extract-landmarks: media in, faceshape landmark files out."""

from __future__ import annotations

import argparse
import logging
import sys


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = argparse.ArgumentParser(
        prog="extract-landmarks",
        description="Extract 68-point facial landmarks into faceshape landmark files",
    )
    parser.add_argument("input", help="image file, directory of images, or video")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--every", type=int, default=1, help="process every Nth frame")
    parser.add_argument("--subject", help="subject label for the emitted documents")
    parser.add_argument("--detector", default="marker", help="detector backend name")
    args = parser.parse_args(argv)

    from .extract import extract

    try:
        records = extract(
            args.input,
            args.out,
            every=args.every,
            subject_label=args.subject,
            detector_name=args.detector,
        )
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    found = sum(1 for r in records if r.face_found)
    print(f"processed {len(records)} frames, {found} with a detected face -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Turn images and videos into faceshape landmark files.

One landmark document per processed frame, in the verification pipeline's
landmark file format (format_version 1, 68 points, interleaved u,v). Frames
without a detected face produce an extraction record with face_found false
and no landmark file. Frame indices always equal the source frame ordinal,
whatever the sampling stride.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .detectors import N_LANDMARKS, get_detector

log = logging.getLogger("faceshape_extract")

FORMAT_VERSION = 1
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}
VIDEO_SUFFIXES = {".mp4", ".avi", ".mov", ".mkv", ".webm"}


@dataclass(frozen=True)
class ExtractionRecord:
    source_path: str
    frame_index: int
    face_found: bool
    detector_confidence: float
    landmark_file: str | None

    def as_document(self) -> dict:
        return {
            "source_path": self.source_path,
            "frame_index": self.frame_index,
            "face_found": self.face_found,
            "detector_confidence": self.detector_confidence,
            "landmark_file": self.landmark_file,
        }


def landmark_document(
    landmarks: np.ndarray, subject_label: str, frame_index: int, source: str
) -> dict:
    points = np.asarray(landmarks, dtype=float).reshape(-1)
    return {
        "format_version": FORMAT_VERSION,
        "subject_label": subject_label,
        "frame_index": int(frame_index),
        "L": N_LANDMARKS,
        "points": points.tolist(),
        "source": source,
    }


def _iter_frames(path: Path, every: int):
    """Yield (frame_index, BGR image) honoring source frame ordinals."""
    if path.is_dir():
        images = sorted(
            p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
        )
        if not images:
            raise FileNotFoundError(f"{path}: no image files found")
        for index, image_path in enumerate(images):
            if index % every != 0:
                continue
            image = cv2.imread(str(image_path))
            if image is None:
                raise IOError(f"unreadable image: {image_path}")
            yield index, image
        return
    if path.suffix.lower() in IMAGE_SUFFIXES:
        image = cv2.imread(str(path))
        if image is None:
            raise IOError(f"unreadable image: {path}")
        yield 0, image
        return
    if path.suffix.lower() in VIDEO_SUFFIXES:
        capture = cv2.VideoCapture(str(path))
        if not capture.isOpened():
            raise IOError(f"unreadable video: {path}")
        try:
            index = 0
            while True:
                ok, frame = capture.read()
                if not ok:
                    break
                if index % every == 0:
                    yield index, frame
                index += 1
        finally:
            capture.release()
        return
    raise IOError(f"unsupported media type: {path}")


def extract(
    path,
    out_dir,
    every: int = 1,
    subject_label: str | None = None,
    detector_name: str = "marker",
) -> list[ExtractionRecord]:
    """Extract landmarks from a media file or image directory.

    Writes one landmark document per detected frame plus an
    ``extraction_records.json`` manifest covering every processed frame,
    detected or not.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such media: {path}")
    if every < 1:
        raise ValueError("--every must be a positive stride")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    detector = get_detector(detector_name)
    label = subject_label or path.stem

    records: list[ExtractionRecord] = []
    for frame_index, image in _iter_frames(path, every):
        detection = None
        try:
            detection = detector.detect(image)
        except Exception as exc:  # detector failure on one frame is not fatal
            log.warning("detector failed on frame %d: %s", frame_index, exc)
        if detection is None:
            records.append(
                ExtractionRecord(
                    source_path=str(path),
                    frame_index=frame_index,
                    face_found=False,
                    detector_confidence=0.0,
                    landmark_file=None,
                )
            )
            continue
        height, width = image.shape[:2]
        landmarks = np.clip(
            detection.landmarks, [0.0, 0.0], [width - 1.0, height - 1.0]
        )
        doc = landmark_document(
            landmarks, label, frame_index, f"extract:{detector_name}:{path.name}"
        )
        landmark_path = out_dir / f"{path.stem}_f{frame_index:06d}.json"
        with open(landmark_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        records.append(
            ExtractionRecord(
                source_path=str(path),
                frame_index=frame_index,
                face_found=True,
                detector_confidence=detection.confidence,
                landmark_file=str(landmark_path),
            )
        )

    manifest = out_dir / "extraction_records.json"
    with open(manifest, "w", encoding="utf-8") as fh:
        json.dump([r.as_document() for r in records], fh, indent=1)
        fh.write("\n")
    found = sum(1 for r in records if r.face_found)
    log.info("%s: %d/%d frames with a detected face", path.name, found, len(records))
    return records

"""Pluggable 68-point landmark detectors.

The pipeline only needs a callable that maps a BGR image to 68 (u, v)
pixel coordinates plus a confidence. The built-in ``marker`` detector
decodes color-indexed overlay markers: each landmark is a small disc whose
green channel encodes its index. That makes synthetic media (and the test
fixtures rendered by ``render_marker_image``) decodable to sub-pixel
accuracy with no model downloads. A learned detector can be dropped in by
registering another factory under a new name; anything that returns the
same (68, 2) array satisfies the contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

N_LANDMARKS = 68
MARKER_RADIUS = 2
_MARKER_BLUE = 40
_MARKER_RED = 255
_GREEN_BASE = 60  # index i is stored as green = _GREEN_BASE + 2 * i


@dataclass(frozen=True)
class Detection:
    landmarks: np.ndarray  # (68, 2) float pixel coordinates
    confidence: float


def marker_color(index: int) -> tuple[int, int, int]:
    """BGR color encoding a landmark index."""
    return (_MARKER_BLUE, _GREEN_BASE + 2 * index, _MARKER_RED)


def render_marker_image(
    landmarks: np.ndarray, size: tuple[int, int] = (512, 512)
) -> np.ndarray:
    """White BGR canvas with one color-indexed marker disc per landmark.

    Used to turn landmark ground truth into decodable synthetic media.
    """
    landmarks = np.asarray(landmarks, dtype=float).reshape(N_LANDMARKS, 2)
    height, width = size
    image = np.full((height, width, 3), 255, dtype=np.uint8)
    for index, (u, v) in enumerate(landmarks):
        center = (int(round(u)), int(round(v)))
        cv2.circle(image, center, MARKER_RADIUS, marker_color(index), thickness=-1)
    return image


class MarkerDetector:
    """Decode color-indexed marker overlays back to landmark coordinates.

    A frame counts as a detected face only when every marker is visible;
    the confidence is the fraction of markers found.
    """

    name = "marker"

    def detect(self, image: np.ndarray) -> Detection | None:
        if image.ndim != 3 or image.shape[2] != 3:
            return None
        blue = image[:, :, 0].astype(np.int16)
        green = image[:, :, 1].astype(np.int16)
        red = image[:, :, 2].astype(np.int16)
        candidate = (np.abs(blue - _MARKER_BLUE) < 30) & (np.abs(red - _MARKER_RED) < 30)
        if not np.any(candidate):
            return None
        coords = np.zeros((N_LANDMARKS, 2))
        found = 0
        ys, xs = np.nonzero(candidate)
        greens = green[ys, xs]
        for index in range(N_LANDMARKS):
            mask = np.abs(greens - (_GREEN_BASE + 2 * index)) <= 0
            if not np.any(mask):
                continue
            coords[index] = (xs[mask].mean(), ys[mask].mean())
            found += 1
        if found < N_LANDMARKS:
            # partial overlays are treated as no usable face
            return None
        return Detection(landmarks=coords, confidence=found / N_LANDMARKS)


_REGISTRY = {
    MarkerDetector.name: MarkerDetector,
}


def get_detector(name: str):
    try:
        factory = _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise ValueError(f"unknown detector {name!r} (available: {known})") from None
    return factory()


def register_detector(name: str, factory) -> None:
    """Extension point for plugging in learned detectors."""
    _REGISTRY[name] = factory

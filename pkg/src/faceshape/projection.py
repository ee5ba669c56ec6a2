"""Weak-perspective projection of 3D landmark shapes onto the image plane.

A pose is an isotropic pixel scale, a proper rotation, and a 2D translation
applied after projection: u = scale * (R @ p)[:2] + translation. Pushing the
translation past the projection removes the unobservable depth offset of a
3D pre-rotation translation.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import Landmarks3D
from .docio import FORMAT_VERSION, expect_fields, expect_version, read_document, write_document
from .errors import DimensionMismatchError, SchemaError

_ROTATION_TOL = 1e-8


@dataclass(frozen=True)
class Pose:
    """Weak-perspective camera: pixel scale, rotation, post-projection 2D shift."""

    scale: float
    rotation: np.ndarray      # (3, 3), proper rotation
    translation: np.ndarray   # (2,), pixels

    def __post_init__(self):
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise SchemaError(f"pose scale must be positive and finite, got {self.scale}")
        if self.rotation.shape != (3, 3):
            raise DimensionMismatchError("rotation must be a 3x3 matrix")
        if self.translation.shape != (2,):
            raise DimensionMismatchError("translation must be a 2-vector")
        if not np.all(np.isfinite(self.rotation)) or not np.all(np.isfinite(self.translation)):
            raise SchemaError("pose contains non-finite entries")
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        if err > _ROTATION_TOL:
            raise SchemaError(f"rotation is not orthogonal (max deviation {err:.3e})")
        det = np.linalg.det(self.rotation)
        if abs(det - 1.0) > _ROTATION_TOL:
            raise SchemaError(f"rotation must be proper (det = {det:.12f})")


@dataclass(frozen=True)
class Landmarks2D:
    """Flat (2L,) vector of image landmarks, interleaved (u1, v1, u2, ...)."""

    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        if self.points.ndim != 1 or self.points.size % 2 != 0:
            raise DimensionMismatchError("2D landmark vector length must be a multiple of 2")
        if not np.all(np.isfinite(self.points)):
            raise SchemaError("2D landmarks contain non-finite entries")

    @property
    def landmark_count(self) -> int:
        return self.points.size // 2

    def as_points(self) -> np.ndarray:
        return self.points.reshape(-1, 2)


def project(pose: Pose, shape: Landmarks3D) -> Landmarks2D:
    """Apply the weak-perspective camera to every vertex."""
    pts = shape.as_points()
    uv = pose.scale * (pts @ pose.rotation.T)[:, :2] + pose.translation
    return Landmarks2D(uv.reshape(-1))


# ---------------------------------------------------------------------------
# Landmark file format: the on-disk contract with ingestion adapters.
# A file holds either one frame document or an array of them.

_LANDMARK_FIELDS = ["format_version", "subject_label", "frame_index", "L", "points", "source"]


def landmark_document(
    landmarks: Landmarks2D, subject_label: str, frame_index: int, source: str
) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "subject_label": subject_label,
        "frame_index": int(frame_index),
        "L": landmarks.landmark_count,
        "points": landmarks.points.tolist(),
        "source": source,
    }


def parse_landmark_document(doc: dict, path="<doc>") -> tuple[Landmarks2D, dict]:
    """Validate one frame document; returns (landmarks, metadata)."""
    expect_fields(doc, _LANDMARK_FIELDS, path)
    expect_version(doc, path)
    try:
        points = np.asarray(doc["points"], dtype=float)
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"{path}: points are not numeric: {exc}") from exc
    if points.ndim != 1 or points.size != 2 * doc["L"]:
        raise SchemaError(f"{path}: points length {points.size} does not match L = {doc['L']}")
    try:
        landmarks = Landmarks2D(points)
    except (SchemaError, DimensionMismatchError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    meta = {
        "subject_label": str(doc["subject_label"]),
        "frame_index": int(doc["frame_index"]),
        "source": str(doc["source"]),
    }
    return landmarks, meta


def save_landmark_frames(docs: list[dict], path) -> None:
    """Write one frame document or an array of them."""
    write_document(docs[0] if len(docs) == 1 else docs, path)


def load_landmark_frames(path) -> list[tuple[Landmarks2D, dict]]:
    """Read a landmark file; always returns a list of (landmarks, metadata)."""
    raw = read_document(path)
    docs = raw if isinstance(raw, list) else [raw]
    if not docs:
        raise SchemaError(f"{path}: empty frame array")
    return [parse_landmark_document(doc, path) for doc in docs]


def load_landmark_files(paths) -> list[tuple[Landmarks2D, dict]]:
    """Concatenate frames from several files in argument order."""
    frames: list[tuple[Landmarks2D, dict]] = []
    for path in paths:
        frames.extend(load_landmark_frames(Path(path)))
    return frames

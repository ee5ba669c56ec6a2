"""End-to-end verification: landmarks -> fit -> feature -> distance -> verdict.

A frame claimed to show an enrolled subject is fitted, its identity feature
is scored against the subject's template, and it is labeled fake exactly when
the distance exceeds the threshold. Videos aggregate frame verdicts by
majority vote (default) or by mean distance; frames whose fit degenerates are
recorded as skips, never silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import ShapeBasis
from .docio import FORMAT_VERSION
from .errors import BasisMismatchError, DegenerateGeometryError, DimensionMismatchError, SchemaError
from .fitting import FitOptions, fit
from .projection import Landmarks2D
from .template import Template, cosine_distance, mahalanobis, select_features

LABEL_GENUINE = "genuine"
LABEL_FAKE = "fake"
AGGREGATION_MAJORITY = "majority"
AGGREGATION_MEAN = "mean_distance"

HISTOGRAM_CAP = 100.0  # presentation rule: distances over the cap render as the cap


@dataclass(frozen=True)
class Verdict:
    distance: float
    threshold: float
    label: str
    frame_index: int
    fit_residual_rms: float

    def as_record(self) -> dict:
        return {
            "frame_index": self.frame_index,
            "distance": self.distance,
            "label": self.label,
            "residual_rms": self.fit_residual_rms,
        }


@dataclass(frozen=True)
class SkippedFrame:
    frame_index: int
    reason: str


@dataclass(frozen=True)
class VideoVerdict:
    frame_verdicts: tuple[Verdict, ...]
    skipped: tuple[SkippedFrame, ...]
    fake_fraction: float
    label: str
    aggregation: str
    threshold: float

    def as_document(self, subject_id: str) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "subject_id": subject_id,
            "threshold": self.threshold,
            "aggregation": self.aggregation,
            "frames": [v.as_record() for v in self.frame_verdicts],
            "skipped": [{"frame_index": s.frame_index, "reason": s.reason} for s in self.skipped],
            "fake_fraction": self.fake_fraction,
            "n_frames_used": len(self.frame_verdicts),
            "video_label": self.label,
        }


def label_for(distance: float, threshold: float) -> str:
    return LABEL_FAKE if distance > threshold else LABEL_GENUINE


def _check_binding(template: Template, basis: ShapeBasis) -> None:
    if template.basis_id and basis.basis_id and template.basis_id != basis.basis_id:
        raise BasisMismatchError(
            f"template is bound to basis {template.basis_id!r} but "
            f"{basis.basis_id!r} was supplied"
        )
    if template.k > basis.n_id:
        raise DimensionMismatchError(
            f"template uses {template.k} feature dimensions but the basis has "
            f"only {basis.n_id} identity components"
        )


def verify_frame(
    landmarks: Landmarks2D,
    template: Template,
    basis: ShapeBasis,
    threshold: float,
    opts: FitOptions = FitOptions(),
    frame_index: int = 0,
    metric: str = "mahalanobis",
) -> Verdict:
    """Score one frame against the claimed subject's template."""
    _check_binding(template, basis)
    result = fit(landmarks, basis, opts)
    feature = select_features(result.coeffs, template.k)
    if metric == "mahalanobis":
        distance = mahalanobis(template, feature)
    elif metric == "cosine":
        distance = cosine_distance(template, feature)
    else:
        raise SchemaError(f"unknown metric {metric!r}")
    return Verdict(
        distance=distance,
        threshold=threshold,
        label=label_for(distance, threshold),
        frame_index=frame_index,
        fit_residual_rms=result.residual_rms,
    )


def aggregate_verdicts(
    verdicts, skipped, threshold: float, aggregation: str = AGGREGATION_MAJORITY
) -> VideoVerdict:
    """Deterministic reduction over frame verdicts, ordered by frame index."""
    verdicts = tuple(sorted(verdicts, key=lambda v: v.frame_index))
    skipped = tuple(skipped)
    if not verdicts:
        raise SchemaError("no usable frames to aggregate")
    fake_fraction = sum(1 for v in verdicts if v.label == LABEL_FAKE) / len(verdicts)
    if aggregation == AGGREGATION_MAJORITY:
        label = LABEL_FAKE if fake_fraction > 0.5 else LABEL_GENUINE
    elif aggregation == AGGREGATION_MEAN:
        mean_distance = float(np.mean([v.distance for v in verdicts]))
        label = label_for(mean_distance, threshold)
    else:
        raise SchemaError(f"unknown aggregation {aggregation!r}")
    return VideoVerdict(
        frame_verdicts=verdicts,
        skipped=skipped,
        fake_fraction=fake_fraction,
        label=label,
        aggregation=aggregation,
        threshold=threshold,
    )


def verify_video(
    frames,
    template: Template,
    basis: ShapeBasis,
    threshold: float,
    aggregation: str = AGGREGATION_MAJORITY,
    opts: FitOptions = FitOptions(),
    metric: str = "mahalanobis",
) -> VideoVerdict:
    """Verify a sequence of frames; degenerate fits become skip records."""
    verdicts = []
    skipped = []
    for index, landmarks in enumerate(frames):
        frame_index = index
        if isinstance(landmarks, tuple):
            landmarks, meta = landmarks
            frame_index = meta.get("frame_index", index)
        try:
            verdicts.append(
                verify_frame(landmarks, template, basis, threshold, opts, frame_index, metric)
            )
        except DegenerateGeometryError as exc:
            skipped.append(SkippedFrame(frame_index=frame_index, reason=str(exc)))
    if not verdicts:
        raise SchemaError(
            f"no usable frames: all {len(skipped)} frames were skipped"
        )
    return aggregate_verdicts(verdicts, skipped, threshold, aggregation)


def distance_histogram_clip(distances, cap: float = HISTOGRAM_CAP) -> np.ndarray:
    """Clip distances for report rendering only; decisions use raw values."""
    arr = np.asarray(distances, dtype=float)
    return np.minimum(arr, cap)

"""Per-subject shape templates and the distance measures scored against them.

A template summarizes the identity coefficients fitted over a trusted
enrollment clip: the feature mean, the unbiased sample covariance, and a
cached inverse of the shrinkage-regularized covariance. Verification then
measures how far a query feature sits from that distribution.

The frame count must be at least the feature dimension, otherwise the
covariance cannot be inverted; enrollment enforces this hard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .basis import Coefficients
from .docio import FORMAT_VERSION, expect_fields, expect_version, read_document, write_document
from .errors import DimensionMismatchError, EnrollmentError, SchemaError

DEFAULT_FEATURE_DIM = 20
DEFAULT_MIN_FRAMES = 100

_SHRINKAGE_ABS = 1e-9
_SHRINKAGE_REL = 1e-6
_SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class ShapeFeature:
    """Leading slice of identity coefficients used as the detection feature."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1 or self.values.size < 1:
            raise DimensionMismatchError("feature must be a non-empty vector")
        if not np.all(np.isfinite(self.values)):
            raise SchemaError("feature contains non-finite entries")

    @property
    def k(self) -> int:
        return self.values.size


def select_features(coeffs: Coefficients, k: int = DEFAULT_FEATURE_DIM) -> ShapeFeature:
    """First k identity coefficients; principal components are variance-ordered."""
    if not 1 <= k <= coeffs.alpha_id.size:
        raise DimensionMismatchError(
            f"k = {k} out of range [1, {coeffs.alpha_id.size}]"
        )
    return ShapeFeature(coeffs.alpha_id[:k].copy())


@dataclass(frozen=True)
class Template:
    """Enrolled feature distribution for one subject."""

    subject_id: str
    mean: np.ndarray
    covariance: np.ndarray
    inv_covariance: np.ndarray
    frame_count: int
    shrinkage: float
    basis_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "covariance", np.asarray(self.covariance, dtype=float))
        object.__setattr__(self, "inv_covariance", np.asarray(self.inv_covariance, dtype=float))
        k = self.k
        if self.covariance.shape != (k, k) or self.inv_covariance.shape != (k, k):
            raise DimensionMismatchError("covariance shape inconsistent with mean")
        if self.frame_count < k:
            raise SchemaError(
                f"template built from {self.frame_count} frames but has {k} feature "
                "dimensions; the frame count must not be less than the feature dimension"
            )
        if not (
            np.all(np.isfinite(self.mean))
            and np.all(np.isfinite(self.covariance))
            and np.all(np.isfinite(self.inv_covariance))
        ):
            raise SchemaError("template contains non-finite entries")
        asym = np.abs(self.covariance - self.covariance.T).max(initial=0.0)
        if asym > _SYMMETRY_TOL:
            raise SchemaError(f"covariance is not symmetric (max asymmetry {asym:.3e})")
        if not (np.isfinite(self.shrinkage) and self.shrinkage >= 0):
            raise SchemaError("shrinkage must be nonnegative and finite")

    @property
    def k(self) -> int:
        return self.mean.size


def _auto_shrinkage(covariance: np.ndarray) -> float:
    return max(_SHRINKAGE_ABS, _SHRINKAGE_REL * float(np.trace(covariance)) / covariance.shape[0])


def _regularized_inverse(covariance: np.ndarray, shrinkage: float) -> np.ndarray:
    k = covariance.shape[0]
    regularized = covariance + shrinkage * np.eye(k)
    try:
        inv = cho_solve(cho_factor(regularized), np.eye(k))
    except np.linalg.LinAlgError as exc:
        raise EnrollmentError(
            f"covariance plus shrinkage {shrinkage:.3e} is not positive definite: {exc}"
        ) from exc
    return (inv + inv.T) / 2.0


def enroll(
    features,
    subject_id: str,
    shrinkage: float | None = None,
    min_frames: int = DEFAULT_MIN_FRAMES,
    basis_id: str = "",
) -> Template:
    """Build a subject template from enrollment features.

    ``shrinkage`` of None picks max(1e-9, 1e-6 * trace/k); pass an explicit
    value (0 included) to override. ``min_frames`` is the enrollment-duration
    floor and may be lowered; the frame count >= feature dimension floor may
    not.
    """
    rows = np.array([np.asarray(f.values if isinstance(f, ShapeFeature) else f, dtype=float)
                     for f in features])
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise EnrollmentError("enrollment needs a non-empty sequence of equal-length features")
    n, k = rows.shape
    if n < k:
        raise EnrollmentError(
            f"cannot enroll {subject_id!r}: {n} frames for {k} feature dimensions; "
            "the covariance is only invertible when the frame count is at least "
            "the feature dimension"
        )
    if n < min_frames:
        raise EnrollmentError(
            f"cannot enroll {subject_id!r}: {n} frames is below the minimum "
            f"enrollment duration of {min_frames}"
        )
    if not np.all(np.isfinite(rows)):
        raise EnrollmentError("enrollment features contain non-finite values")

    mean = rows.mean(axis=0)
    centered = rows - mean
    covariance = (centered.T @ centered) / (n - 1) if n > 1 else np.zeros((k, k))
    covariance = (covariance + covariance.T) / 2.0
    lam = _auto_shrinkage(covariance) if shrinkage is None else float(shrinkage)
    return Template(
        subject_id=subject_id,
        mean=mean,
        covariance=covariance,
        inv_covariance=_regularized_inverse(covariance, lam),
        frame_count=n,
        shrinkage=lam,
        basis_id=basis_id,
    )


def _check_query(template: Template, x: ShapeFeature) -> np.ndarray:
    if x.k != template.k:
        raise DimensionMismatchError(
            f"query has {x.k} dimensions, template has {template.k}"
        )
    return x.values - template.mean


def mahalanobis(template: Template, x: ShapeFeature) -> float:
    """sqrt((x - mean)^T inv(cov + shrinkage I) (x - mean)), clamped at zero."""
    diff = _check_query(template, x)
    quad = float(diff @ template.inv_covariance @ diff)
    return float(np.sqrt(max(quad, 0.0)))


def cosine_distance(template: Template, x: ShapeFeature) -> float:
    """1 - cos(angle between the query and the template mean), in [0, 2]."""
    diff_norm = float(np.linalg.norm(x.values))
    mean_norm = float(np.linalg.norm(template.mean))
    if diff_norm <= 0.0 or mean_norm <= 0.0:
        raise SchemaError("cosine distance is undefined for zero-norm vectors")
    if x.k != template.k:
        raise DimensionMismatchError(
            f"query has {x.k} dimensions, template has {template.k}"
        )
    return 1.0 - float(x.values @ template.mean) / (diff_norm * mean_norm)


def mahalanobis_batch(template: Template, rows: np.ndarray) -> np.ndarray:
    """Mahalanobis distance for each row of an (n, k) feature matrix."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != template.k:
        raise DimensionMismatchError(
            f"rows must be (n, {template.k}), got {rows.shape}"
        )
    diff = rows - template.mean
    quad = np.einsum("ij,ij->i", diff @ template.inv_covariance, diff)
    return np.sqrt(np.maximum(quad, 0.0))


def cosine_batch(template: Template, rows: np.ndarray) -> np.ndarray:
    """Cosine distance to the template mean for each row of an (n, k) matrix."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != template.k:
        raise DimensionMismatchError(
            f"rows must be (n, {template.k}), got {rows.shape}"
        )
    norms = np.linalg.norm(rows, axis=1)
    mean_norm = float(np.linalg.norm(template.mean))
    if mean_norm <= 0.0 or np.any(norms <= 0.0):
        raise SchemaError("cosine distance is undefined for zero-norm vectors")
    return 1.0 - (rows @ template.mean) / (norms * mean_norm)


def save_template(template: Template, path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "subject_id": template.subject_id,
        "k": template.k,
        "n": template.frame_count,
        "shrinkage": template.shrinkage,
        "mean": template.mean.tolist(),
        "covariance": template.covariance.reshape(-1).tolist(),  # row-major
        "basis_id": template.basis_id,
    }
    write_document(doc, path)


def load_template(path) -> Template:
    doc = read_document(path)
    expect_fields(
        doc,
        ["format_version", "subject_id", "k", "n", "shrinkage", "mean", "covariance", "basis_id"],
        path,
    )
    expect_version(doc, path)
    k = int(doc["k"])
    try:
        mean = np.asarray(doc["mean"], dtype=float)
        covariance = np.asarray(doc["covariance"], dtype=float).reshape(k, k)
        template = Template(
            subject_id=str(doc["subject_id"]),
            mean=mean,
            covariance=covariance,
            inv_covariance=_regularized_inverse(covariance, float(doc["shrinkage"])),
            frame_count=int(doc["n"]),
            shrinkage=float(doc["shrinkage"]),
            basis_id=str(doc["basis_id"]),
        )
    except (ValueError, TypeError, DimensionMismatchError, EnrollmentError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    return template

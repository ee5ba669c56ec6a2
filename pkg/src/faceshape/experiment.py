"""Experiment sweeps over synthetic worlds: enrollment, scoring, ablations.

Every frame is fitted exactly once; identity-coefficient rows are cached and
re-sliced for each feature dimension and distance metric, so ablation runs
share frames (and therefore seeds) by construction. Laundering sweeps
calibrate the threshold on the first rung and hold it fixed afterwards,
matching the fixed-threshold testing protocol: templates come from the
trusted base-noise enrollment segments, only query frames get noisier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationResult, auc, calibrate_threshold, evaluate
from .fitting import FitOptions, fit
from .synthetic import SyntheticWorld
from .template import (
    Template,
    cosine_batch,
    enroll,
    mahalanobis_batch,
)

METRIC_MAHALANOBIS = "mahalanobis"
METRIC_COSINE = "cosine"
METRICS = (METRIC_MAHALANOBIS, METRIC_COSINE)


@dataclass(frozen=True)
class ConditionMetrics:
    condition: str
    sigma: float
    metric: str
    k: int
    threshold: float
    acc_genuine: float
    acc_fake: float
    acc_overall: float
    auc: float
    n_genuine: int
    n_fake: int

    def as_record(self) -> dict:
        return {
            "condition": self.condition,
            "sigma": self.sigma,
            "metric": self.metric,
            "k": self.k,
            "threshold": self.threshold,
            "acc_genuine": self.acc_genuine,
            "acc_fake": self.acc_fake,
            "acc_overall": self.acc_overall,
            "auc": self.auc,
            "n_genuine": self.n_genuine,
            "n_fake": self.n_fake,
        }


def fit_identity_rows(frames, basis, opts: FitOptions = FitOptions()) -> np.ndarray:
    """Fit every frame and stack the identity coefficients, one row per frame."""
    return np.array([fit(f.landmarks, basis, opts).coeffs.alpha_id for f in frames])


def batch_distances(template: Template, rows: np.ndarray, metric: str) -> np.ndarray:
    if metric == METRIC_MAHALANOBIS:
        return mahalanobis_batch(template, rows[:, : template.k])
    if metric == METRIC_COSINE:
        return cosine_batch(template, rows[:, : template.k])
    raise ValueError(f"unknown metric {metric!r}")


class ExperimentRunner:
    """Caches per-frame fits for one world and answers metric queries."""

    def __init__(self, world: SyntheticWorld, n_heldout: int = 50,
                 fit_opts: FitOptions = FitOptions()):
        self.world = world
        self.n_heldout = n_heldout
        self.fit_opts = fit_opts
        self._enroll_rows: dict[str, np.ndarray] = {}
        self._query_rows: dict = {}  # (name, sigma) -> heldout alpha rows
        self._swap_rows: dict = {}  # (claimed, sigma) -> swap alpha rows
        self._templates: dict = {}  # k -> {name: Template}

    # -- swap pairing: each subject is attacked with the next subject's shape
    def swap_source(self, claimed: str) -> str:
        names = self.world.subject_names
        return names[(names.index(claimed) + 1) % len(names)]

    def enroll_rows(self, name: str) -> np.ndarray:
        if name not in self._enroll_rows:
            frames = self.world.enrollment_frames(name)
            self._enroll_rows[name] = fit_identity_rows(frames, self.world.basis, self.fit_opts)
        return self._enroll_rows[name]

    def templates(self, k: int) -> dict:
        if k not in self._templates:
            self._templates[k] = {
                name: enroll(
                    self.enroll_rows(name)[:, :k],
                    name,
                    min_frames=min(100, self.world.config.frames_per_subject),
                    basis_id=self.world.basis.basis_id,
                )
                for name in self.world.subject_names
            }
        return self._templates[k]

    def _heldout_rows(self, name: str, sigma: float) -> np.ndarray:
        key = (name, sigma)
        if key not in self._query_rows:
            frames = self.world.heldout_frames(name, self.n_heldout, noise_px=sigma)
            self._query_rows[key] = fit_identity_rows(frames, self.world.basis, self.fit_opts)
        return self._query_rows[key]

    def _swap_rows_for(self, claimed: str, sigma: float) -> np.ndarray:
        key = (claimed, sigma)
        if key not in self._swap_rows:
            frames = self.world.swap_frames(
                claimed, self.swap_source(claimed), self.n_heldout, noise_px=sigma
            )
            self._swap_rows[key] = fit_identity_rows(frames, self.world.basis, self.fit_opts)
        return self._swap_rows[key]

    def subject_distances(self, k: int, metric: str, sigma: float) -> dict:
        """Per-subject (genuine, fake) distance arrays at one noise level."""
        templates = self.templates(k)
        out = {}
        for name in self.world.subject_names:
            genuine = batch_distances(templates[name], self._heldout_rows(name, sigma), metric)
            fake = batch_distances(templates[name], self._swap_rows_for(name, sigma), metric)
            out[name] = (genuine, fake)
        return out

    def pooled_distances(self, k: int, metric: str, sigma: float) -> tuple[np.ndarray, np.ndarray]:
        per_subject = self.subject_distances(k, metric, sigma)
        genuine = np.concatenate([g for g, _ in per_subject.values()])
        fake = np.concatenate([f for _, f in per_subject.values()])
        return genuine, fake

    def condition_metrics(
        self,
        condition: str,
        k: int,
        metric: str,
        sigma: float,
        threshold: float | None = None,
    ) -> ConditionMetrics:
        """Metrics at one condition; calibrates a threshold unless one is given."""
        genuine, fake = self.pooled_distances(k, metric, sigma)
        if threshold is None:
            threshold = calibrate_threshold(genuine, fake).threshold
        acc_g, acc_f, acc = evaluate(threshold, genuine, fake)
        return ConditionMetrics(
            condition=condition,
            sigma=sigma,
            metric=metric,
            k=k,
            threshold=float(threshold),
            acc_genuine=acc_g,
            acc_fake=acc_f,
            acc_overall=acc,
            auc=auc(genuine, fake),
            n_genuine=genuine.size,
            n_fake=fake.size,
        )

    def calibrate(self, k: int, metric: str, sigma: float) -> CalibrationResult:
        genuine, fake = self.pooled_distances(k, metric, sigma)
        return calibrate_threshold(genuine, fake)

    def per_subject_metrics(
        self, condition: str, k: int, metric: str, sigma: float
    ) -> list[ConditionMetrics]:
        """Per-subject calibration mode: one threshold (and row) per subject."""
        rows = []
        for name, (genuine, fake) in self.subject_distances(k, metric, sigma).items():
            result = calibrate_threshold(genuine, fake)
            rows.append(
                ConditionMetrics(
                    condition=f"{condition}:{name}",
                    sigma=sigma,
                    metric=metric,
                    k=k,
                    threshold=result.threshold,
                    acc_genuine=result.acc_genuine,
                    acc_fake=result.acc_fake,
                    acc_overall=result.acc_overall,
                    auc=auc(genuine, fake),
                    n_genuine=genuine.size,
                    n_fake=fake.size,
                )
            )
        return rows

    def ladder_metrics(
        self, condition: str, k: int, metric: str, sigmas
    ) -> list[ConditionMetrics]:
        """Fixed-threshold sweep: calibrate on the first rung, evaluate on all."""
        sigmas = list(sigmas)
        threshold = self.calibrate(k, metric, sigmas[0]).threshold
        return [
            self.condition_metrics(condition, k, metric, sigma, threshold=threshold)
            for sigma in sigmas
        ]

    def k_ablation_metrics(self, ks, metric: str, sigma: float) -> list[ConditionMetrics]:
        """One calibrated row per feature dimension, all sharing frames."""
        return [
            self.condition_metrics("ablate-k", k, metric, sigma) for k in ks
        ]

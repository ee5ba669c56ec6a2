"""Decision-threshold calibration from labeled distance populations.

A genuine sample is accepted when its distance is at or below the threshold;
anything above is called fake. Calibration scans candidate thresholds (the
midpoints between consecutive distinct distances, plus one sentinel below the
minimum and one above the maximum) and picks the candidate that balances the
two per-class accuracies, breaking ties by overall accuracy and then by the
smaller threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .docio import FORMAT_VERSION, write_document
from .errors import SchemaError


@dataclass(frozen=True)
class CalibrationResult:
    threshold: float
    acc_genuine: float
    acc_fake: float
    acc_overall: float
    n_genuine: int
    n_fake: int

    def as_document(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "threshold": self.threshold,
            "acc_genuine": self.acc_genuine,
            "acc_fake": self.acc_fake,
            "acc_overall": self.acc_overall,
            "n_genuine": self.n_genuine,
            "n_fake": self.n_fake,
        }


def _as_population(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise SchemaError(f"{name} population must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{name} population contains non-finite values")
    if np.any(arr < 0):
        raise SchemaError(f"{name} population contains negative distances")
    return arr


def evaluate(threshold: float, genuine, fake) -> tuple[float, float, float]:
    """Per-class and overall accuracy at a fixed threshold (genuine: d <= t)."""
    g = _as_population(genuine, "genuine")
    f = _as_population(fake, "fake")
    acc_g = float(np.mean(g <= threshold))
    acc_f = float(np.mean(f > threshold))
    acc = (acc_g * g.size + acc_f * f.size) / (g.size + f.size)
    return acc_g, acc_f, float(acc)


def threshold_candidates(genuine, fake) -> np.ndarray:
    """Midpoints of consecutive distinct pooled distances plus two sentinels."""
    pooled = np.unique(np.concatenate([np.asarray(genuine, float), np.asarray(fake, float)]))
    mids = (pooled[:-1] + pooled[1:]) / 2.0
    below = pooled[0] / 2.0  # distances are nonnegative, so this stays >= 0
    above = pooled[-1] + 1.0
    return np.concatenate([[below], mids, [above]])


def calibrate_threshold(genuine, fake) -> CalibrationResult:
    """Pick the candidate threshold that balances the per-class accuracies."""
    g = _as_population(genuine, "genuine")
    f = _as_population(fake, "fake")
    candidates = threshold_candidates(g, f)

    g_sorted = np.sort(g)
    f_sorted = np.sort(f)
    acc_g = np.searchsorted(g_sorted, candidates, side="right") / g.size
    acc_f = (f.size - np.searchsorted(f_sorted, candidates, side="right")) / f.size
    acc_all = (acc_g * g.size + acc_f * f.size) / (g.size + f.size)

    gap = np.abs(acc_g - acc_f)
    best = np.lexsort((candidates, -acc_all, gap))[0]
    return CalibrationResult(
        threshold=float(candidates[best]),
        acc_genuine=float(acc_g[best]),
        acc_fake=float(acc_f[best]),
        acc_overall=float(acc_all[best]),
        n_genuine=int(g.size),
        n_fake=int(f.size),
    )


def auc(genuine, fake) -> float:
    """Probability that a random fake distance exceeds a random genuine one.

    Rank-based Mann-Whitney statistic with the usual half-credit for ties;
    1.0 means perfectly separable populations.
    """
    g = _as_population(genuine, "genuine")
    f = _as_population(fake, "fake")
    pooled = np.concatenate([g, f])
    order = np.argsort(pooled, kind="mergesort")
    ranks = np.empty(pooled.size)
    ranks[order] = np.arange(1, pooled.size + 1)
    # average ranks over ties
    sorted_vals = pooled[order]
    boundaries = np.flatnonzero(np.diff(sorted_vals) != 0) + 1
    for start, stop in zip(np.concatenate([[0], boundaries]),
                           np.concatenate([boundaries, [pooled.size]])):
        ranks[order[start:stop]] = 0.5 * (start + 1 + stop)
    rank_sum_fake = float(np.sum(ranks[g.size:]))
    u = rank_sum_fake - f.size * (f.size + 1) / 2.0
    return u / (g.size * f.size)


def write_calibration_report(result: CalibrationResult, path) -> None:
    write_document(result.as_document(), path)


def load_scores(path) -> np.ndarray:
    """Newline-delimited decimal distances; blank lines ignored."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            try:
                values.append(float(text))
            except ValueError as exc:
                raise SchemaError(f"{path}:{line_no}: not a number: {text!r}") from exc
    return np.asarray(values, dtype=float)


def save_scores(values, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in np.asarray(values, dtype=float):
            fh.write(f"{v}\n")

"""Report rendering: delimited metric tables and matplotlib figures.

Every CLI report path writes the canonical JSON document, then a CSV with
the same rows for spreadsheet use, and PNG figures next to them. Distances
in histograms are clipped at 100 for presentation only; decisions and the
delimited output always carry raw values.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .detector import HISTOGRAM_CAP, VideoVerdict, distance_histogram_clip

_METRIC_COLUMNS = [
    "condition", "sigma", "metric", "k", "threshold",
    "acc_genuine", "acc_fake", "acc_overall", "auc", "n_genuine", "n_fake",
]


def write_metrics_csv(rows, path) -> None:
    """Condition-metric records as delimited text, one row per condition."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=_METRIC_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_record() if hasattr(row, "as_record") else row)


def write_distances_csv(records, path) -> None:
    """Per-frame verification records (raw distances, not clipped)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["frame_index", "distance", "label", "residual_rms"])
        writer.writeheader()
        for record in records:
            writer.writerow(record)


def save_distance_histogram(genuine, fake, path, threshold=None, cap=HISTOGRAM_CAP) -> None:
    """Genuine-vs-fake distance histogram with values over the cap clipped."""
    genuine = distance_histogram_clip(genuine, cap)
    fake = distance_histogram_clip(fake, cap)
    upper = max(genuine.max(initial=0.0), fake.max(initial=0.0), 1e-9)
    bins = np.linspace(0.0, upper, 60)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(genuine, bins=bins, color="tab:green", alpha=0.6, label="genuine")
    ax.hist(fake, bins=bins, color="tab:red", alpha=0.6, label="fake")
    if threshold is not None and np.isfinite(threshold):
        ax.axvline(min(threshold, cap), color="k", linestyle="--", label="threshold")
    ax.set_xlabel(f"distance (clipped at {cap:g})")
    ax.set_ylabel("frames")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_frame_scatter(verdict: VideoVerdict, path, cap=HISTOGRAM_CAP) -> None:
    """Per-frame distance timeline for one verified clip."""
    idx = [v.frame_index for v in verdict.frame_verdicts]
    dist = distance_histogram_clip([v.distance for v in verdict.frame_verdicts], cap)
    colors = ["tab:red" if v.label == "fake" else "tab:green" for v in verdict.frame_verdicts]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.scatter(idx, dist, c=colors, s=14)
    if np.isfinite(verdict.threshold):
        ax.axhline(min(verdict.threshold, cap), color="k", linestyle="--", label="threshold")
        ax.legend()
    ax.set_xlabel("frame")
    ax.set_ylabel(f"distance (clipped at {cap:g})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_ladder_curve(rows, path) -> None:
    """Accuracy against noise level, one line per metric."""
    fig, ax = plt.subplots(figsize=(6, 4))
    by_metric: dict[str, list] = {}
    for row in rows:
        by_metric.setdefault(row.metric, []).append(row)
    for metric, metric_rows in sorted(by_metric.items()):
        metric_rows = sorted(metric_rows, key=lambda r: r.sigma)
        ax.plot(
            [r.sigma for r in metric_rows],
            [r.acc_overall for r in metric_rows],
            marker="o",
            label=metric,
        )
    ax.set_xscale("log", base=2)
    ax.set_xlabel("landmark noise (px)")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_k_curve(rows, path) -> None:
    """Accuracy against feature dimension."""
    rows = sorted(rows, key=lambda r: r.k)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([r.k for r in rows], [r.acc_overall for r in rows], marker="s")
    ax.set_xlabel("feature dimension k")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

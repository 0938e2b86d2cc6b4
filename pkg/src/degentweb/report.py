"""Deterministic delimited outputs plus matplotlib figures for reports.

CSV writers are byte-stable given identical rows; figures are rendered
with the Agg backend so reporting works headless.
"""
from __future__ import annotations

import csv
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .analyze import CohortReport  # noqa: E402
from .classify import (DECILE_PERCENTILES, LABEL_INSUFFICIENT,  # noqa: E402
                       LABEL_LLM_DOMINANT)

SITE_CSV_HEADER = ("site", "label", "distance", "n_pages",
                   *(f"p{p}" for p in DECILE_PERCENTILES))


def write_csv(path: str | Path, header: Sequence[str],
              rows: Iterable[Sequence[object]]) -> Path:
    """One CSV file with a fixed header; '' for None cells."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if cell is None else cell for cell in row])
    return path


def site_rows(site_results: Iterable[Mapping]) -> list[tuple]:
    """CSV rows for per-site classification results, sorted by site.

    Each mapping needs: site, label, distance (None when insufficient),
    n_pages, deciles (sequence or None).
    """
    rows = []
    for result in sorted(site_results, key=lambda r: r["site"]):
        deciles = result.get("deciles")
        cells = tuple(deciles) if deciles is not None \
            else (None,) * len(DECILE_PERCENTILES)
        rows.append((result["site"], result["label"], result["distance"],
                     result["n_pages"], *cells))
    return rows


def _finish(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def prevalence_figure(report: CohortReport, path: str | Path) -> Path:
    """Bar chart: per-cohort fraction of llm-dominant sites."""
    path = Path(path)
    labels = [b.label for b in report.buckets]
    fractions = [b.fraction for b in report.buckets]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.7 * len(labels) + 2), 3.5))
    ax.bar(labels, fractions, color="#4878a8")
    ax.set_ylabel("fraction llm-dominant")
    ax.set_xlabel("first-archived cohort")
    ax.set_ylim(0, max(fractions + [0.05]) * 1.2)
    for tick in ax.get_xticklabels():
        tick.set_rotation(45)
        tick.set_ha("right")
    return _finish(fig, path)


def score_distribution_figure(scores_by_label: Mapping[str, Sequence[float]],
                              path: str | Path) -> Path:
    """Overlaid page-score histograms, one per site label."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    colors = {LABEL_LLM_DOMINANT: "#c44e52", LABEL_INSUFFICIENT: "#999999"}
    for label in sorted(scores_by_label):
        scores = list(scores_by_label[label])
        if not scores:
            continue
        ax.hist(scores, bins=40, alpha=0.55, label=f"{label} (n={len(scores)})",
                color=colors.get(label, "#55a868"))
    ax.set_xlabel("page score (lower = more LLM-like)")
    ax.set_ylabel("pages")
    ax.legend()
    return _finish(fig, path)


def distance_figure(distances: Sequence[float], path: str | Path) -> Path:
    """Histogram of signed SVM distances; negative side is llm-dominant."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    if distances:
        ax.hist(list(distances), bins=40, color="#4878a8")
    ax.axvline(0.0, color="#c44e52", linestyle="--", linewidth=1)
    ax.set_xlabel("signed distance to hyperplane")
    ax.set_ylabel("sites")
    return _finish(fig, path)


def accuracy_by_pages_figure(points: Sequence[tuple[int, float]],
                             path: str | Path) -> Path:
    """Mean cross-validation accuracy as pages-per-site grows."""
    path = Path(path)
    ordered = sorted(points)
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot([p for p, _ in ordered], [a for _, a in ordered],
            marker="o", color="#4878a8")
    ax.set_xlabel("pages per site")
    ax.set_ylabel("mean OOD accuracy")
    ax.set_ylim(0.0, 1.02)
    return _finish(fig, path)

# services/metrics/plots.py
import logging
import os
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from models.types import PER_SAMPLE_METRICS, Histogram, PhaseReport  # noqa: E402

logger = logging.getLogger(__name__)

# strips the matplotlib version string so reruns give identical bytes
PNG_METADATA = {'Software': None}


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp_path = f"{path}.tmp"
    fig.savefig(tmp_path, format='png', dpi=100, metadata=PNG_METADATA)
    plt.close(fig)
    os.replace(tmp_path, path)
    logger.debug(f"Saved plot {path}")
    return path


def _overlay(histograms: Dict[str, Histogram], metric: str, path: str) -> str:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, hist in histograms.items():
        centers = (hist.bin_edges[:-1] + hist.bin_edges[1:]) / 2
        ax.plot(centers, hist.counts, marker='o', markersize=3, label=label)
    ax.set_xlabel(metric)
    ax.set_ylabel('samples')
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_phase_histograms(reports: Sequence[PhaseReport], out_dir: str) -> List[str]:
    """One figure per metric overlaying the Pre/Intermediate/Post histograms."""
    paths = []
    for metric in PER_SAMPLE_METRICS:
        hists = {r.phase: r.histograms[metric] for r in reports if metric in r.histograms}
        if hists:
            paths.append(_overlay(hists, metric, os.path.join(out_dir, f"hist_{metric.lower()}.png")))
    return paths


def plot_comparison_histograms(report_a: PhaseReport, report_b: PhaseReport, names: Sequence[str],
                               out_dir: str) -> List[str]:
    """One figure per metric overlaying the final-phase histograms of two runs."""
    paths = []
    for metric in PER_SAMPLE_METRICS:
        if metric in report_a.histograms and metric in report_b.histograms:
            hists = {names[0]: report_a.histograms[metric], names[1]: report_b.histograms[metric]}
            paths.append(_overlay(hists, metric, os.path.join(out_dir, f"compare_{metric.lower()}.png")))
    return paths


def plot_image_grid(rows: Sequence[Sequence[np.ndarray]], column_titles: Sequence[str],
                    row_titles: Sequence[str], path: str) -> str:
    """
    Grid of images, one row per entry.

    Args:
        rows: Each row is a list of H×W×3 images in [0,1]
        column_titles: Title above each column
        row_titles: Label left of each row
        path: Output PNG
    """
    n_rows, n_cols = len(rows), len(column_titles)
    fig, axes = plt.subplots(n_rows, n_cols, figsize=(1.6 * n_cols, 1.6 * n_rows), squeeze=False)
    for r, row in enumerate(rows):
        for c, image in enumerate(row):
            ax = axes[r][c]
            ax.imshow(np.clip(image, 0.0, 1.0), interpolation='nearest')
            ax.set_xticks([])
            ax.set_yticks([])
            if r == 0:
                ax.set_title(column_titles[c], fontsize=7)
            if c == 0:
                ax.set_ylabel(row_titles[r], fontsize=7)
    fig.tight_layout()
    return _save(fig, path)

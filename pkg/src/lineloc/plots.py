"""File-only matplotlib rendering for the report path.

Figures accompany the delimited output of `eval` and `bench`; nothing is
ever shown interactively (the Agg backend is forced).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_accuracy_figure(rows, path) -> None:
    """Bar chart of accuracy per (t, R) threshold pair.

    Args:
        rows: iterables of (t_threshold_m, r_threshold_deg, accuracy).
        path: output image file.
    """
    rows = list(rows)
    labels = [f"{t:g} m\n{r:g}°" for t, r, _ in rows]
    values = [a for _, _, a in rows]
    fig, ax = plt.subplots(figsize=(max(3.2, 1.1 * len(rows)), 3.0))
    ax.bar(range(len(rows)), values, color="#4878a8")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("accuracy")
    ax.set_title("Localization accuracy vs. threshold")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_recall_curves(t_errors, r_errors, path) -> None:
    """Recall-vs-threshold curves for translation and rotation errors."""
    import numpy as np

    t_errors = np.sort(np.asarray(t_errors, dtype=float))
    r_errors = np.sort(np.asarray(r_errors, dtype=float))
    n = len(t_errors)
    recall = np.arange(1, n + 1) / n
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.0, 3.0))
    ax1.step(t_errors, recall, where="post")
    ax1.set_xlabel("t-error (m)")
    ax1.set_ylabel("recall")
    ax1.set_ylim(0, 1.05)
    ax2.step(np.asarray(r_errors), recall, where="post", color="#a85448")
    ax2.set_xlabel("R-error (deg)")
    ax2.set_ylim(0, 1.05)
    fig.suptitle("Pose error recall")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_stage_timings(stage_stats, path) -> None:
    """Bar chart with error bars of per-stage wall-clock timings.

    Args:
        stage_stats: iterable of (stage_name, mean_seconds, stdev_seconds).
        path: output image file.
    """
    stage_stats = list(stage_stats)
    names = [s for s, _, _ in stage_stats]
    means = [m for _, m, _ in stage_stats]
    stds = [d for _, _, d in stage_stats]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.3 * len(names)), 3.2))
    ax.bar(range(len(names)), means, yerr=stds, capsize=3, color="#6a9a58")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, fontsize=8, rotation=20, ha="right")
    ax.set_ylabel("seconds")
    ax.set_title("Stage wall-clock time")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)

"""Matplotlib renderings of the report artifacts.

All figures are written to files (Agg backend); nothing is shown interactively.
PNG output carries no timestamps, so re-rendering the same data is
byte-stable.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import DYNAMIC_POLICY, static_name


def render_cnfs_curves(metrics_by_policy: dict, path) -> None:
    """Cumulative net fraud savings per policy over the test days."""
    fig, ax = plt.subplots(figsize=(9, 5.5))
    for name, metrics in metrics_by_policy.items():
        days = [m.day for m in metrics]
        cumulative = np.cumsum([m.net for m in metrics])
        if name == DYNAMIC_POLICY:
            ax.plot(days, cumulative, label=name, color="black", linewidth=2.2)
        else:
            ax.plot(days, cumulative, label=name, linewidth=1.0, alpha=0.7)
    ax.set_xlabel("day")
    ax.set_ylabel("cumulative net fraud savings ($)")
    ax.set_title("Cumulative net fraud savings by policy")
    ax.legend(ncol=3, fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_heatmap(matrix: np.ndarray, thresholds, path) -> None:
    """Hour-by-threshold selection frequencies of a policy."""
    fig, ax = plt.subplots(figsize=(7, 6))
    im = ax.imshow(matrix, aspect="auto", cmap="Blues", origin="upper",
                   vmin=0.0, vmax=max(matrix.max(), 1e-9))
    ax.set_xticks(range(matrix.shape[1]))
    ax.set_xticklabels(
        [f"{static_name(k)}\n({t})" for k, t in enumerate(thresholds)], fontsize=7
    )
    ax.set_yticks(range(0, matrix.shape[0], 2))
    ax.set_yticklabels(range(1, matrix.shape[0] + 1, 2))
    ax.set_xlabel("threshold action (score cutoff)")
    ax.set_ylabel("hour of day")
    ax.set_title("Threshold selection frequency by hour")
    fig.colorbar(im, ax=ax, label="fraction of days")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_training_curve(log_rows, path) -> None:
    """Per-iteration mean episode reward and loss from a training log."""
    iterations = [r.iteration for r in log_rows]
    rewards = [r.mean_reward for r in log_rows]
    losses = [r.mean_loss for r in log_rows]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax1.plot(iterations, rewards, color="tab:blue")
    ax1.set_ylabel("mean episode reward")
    ax1.grid(True, alpha=0.3)
    ax2.plot(iterations, losses, color="tab:red")
    ax2.set_ylabel("mean TD loss")
    ax2.set_xlabel("iteration")
    ax2.grid(True, alpha=0.3)
    fig.suptitle("Training progress")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)

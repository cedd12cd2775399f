"""SVG figures for sweep reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_scaling(result, path: Path | str) -> Path:
    """Log-log median discrepancy vs n with the predicted shape scaled to the first cell."""
    ns = np.array([c.n for c in result.cells], dtype=float)
    med = np.array([c.median for c in result.cells])
    p95 = np.array([c.p95 for c in result.cells])
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.plot(ns, med, "o-", label="median disc")
    ax.plot(ns, p95, "s--", alpha=0.6, label="95th percentile")
    preds = [c.prediction for c in result.cells]
    if all(p is not None for p in preds) and med[0] > 0:
        pr = np.array(preds, dtype=float)
        ax.plot(ns, pr * med[0] / pr[0], "k:", label="predicted shape (scaled)")
    ax.set_xscale("log", base=2)
    if np.all(med > 0):
        ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("discrepancy")
    title = f"{result.family} / {result.model}"
    if result.slope is not None:
        title += f"  slope {result.slope:.3f}"
    ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def plot_series(metrics, path: Path | str, title: str = "") -> Path:
    """Discrepancy and its three contributions over the checkpoint schedule."""
    t = np.maximum(np.array(metrics.t, dtype=float), 1.0)
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for key, style in (("disc", "k-"), ("disc_init", "b--"), ("disc_dyn", "g-."),
                       ("disc_round", "r:")):
        ax.plot(t, getattr(metrics, key), style, label=key)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("step")
    ax.set_ylabel("discrepancy")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path

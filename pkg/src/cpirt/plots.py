"""Figure rendering for fit results, scores, and study metrics.

All functions write a PNG to the given path and are safe on headless hosts
(Agg backend). Figures accompany the delimited outputs; the CSV/JSON files
remain the canonical results.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .estimation import FitResult
from .inference import PersonPosterior
from .simulation import MetricsTable
from .structural import tau_pmf

__all__ = [
    "plot_tau_distribution",
    "plot_item_parameters",
    "plot_prob_change_histogram",
    "plot_item_recovery",
]


def plot_tau_distribution(fit: FitResult, path: str | Path) -> Path:
    """Bar chart of the fitted marginal change-point distribution."""
    dist = tau_pmf(fit.structural, fit.support)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(dist.support, dist.pmf, color="#4878a8", width=0.8)
    ax.set_xlabel("change-point position $\\tau$")
    ax.set_ylabel("probability")
    ax.set_title(
        f"Marginal change-point distribution "
        f"($\\alpha$={fit.structural.alpha:.3f}, $\\beta$={fit.structural.beta:.3f})"
    )
    ax.set_xticks(dist.support)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_item_parameters(fit: FitResult, path: str | Path) -> Path:
    """Easiness, discrimination, and change-effect estimates per item."""
    J = fit.support.J
    items = np.arange(1, J + 1)
    fig, axes = plt.subplots(3, 1, figsize=(8, 8), sharex=True)
    axes[0].bar(items, fit.items.d, color="#4878a8")
    axes[0].set_ylabel("easiness $d_j$")
    axes[1].bar(items, fit.items.a, color="#6aa66a")
    axes[1].set_ylabel("discrimination $a_j$")
    gamma = np.where(np.arange(J) >= fit.support.c, fit.items.gamma, np.nan)
    axes[2].bar(items, gamma, color="#b25050")
    axes[2].set_ylabel("change effect $\\gamma_j$")
    axes[2].set_xlabel("item")
    axes[0].set_title(f"Item parameter estimates (c={fit.support.c}, J={J})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_prob_change_histogram(posteriors: list[PersonPosterior], path: str | Path) -> Path:
    """Histogram of per-person posterior change probabilities."""
    probs = [p.prob_change for p in posteriors]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(probs, bins=np.linspace(0.0, 1.0, 21), color="#4878a8", edgecolor="white")
    ax.set_xlabel("posterior probability of a change-point")
    ax.set_ylabel("respondents")
    ax.set_title("Evidence for a change in response behavior")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_item_recovery(table: MetricsTable, path: str | Path) -> Path:
    """Per-item bias and RMSE from a parameter-recovery study."""
    if not table.per_item:
        raise ValueError("metrics table has no per-item entries to plot")
    J = len(next(iter(table.per_item.values())))
    items = np.arange(1, J + 1)
    fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharex=True)
    for name in ("d", "a", "gamma"):
        axes[0].plot(items, table.per_item[f"{name}_bias"], marker="o", ms=3, label=name)
        axes[1].plot(items, table.per_item[f"{name}_rmse"], marker="o", ms=3, label=name)
    axes[0].axhline(0.0, color="gray", lw=0.8)
    axes[0].set_ylabel("bias")
    axes[1].set_ylabel("RMSE")
    for ax in axes:
        ax.set_xlabel("item")
        ax.legend(title="parameter")
    fig.suptitle("Item parameter recovery")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)

"""Figures written next to the CSV outputs of the command-line tool."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

FIG_WIDTH = 6.0
GOLDEN = (5 ** 0.5 - 1) / 2


def figure_path(csv_path, suffix: str = ".png") -> str:
    root, _ = os.path.splitext(os.fspath(csv_path))
    return root + suffix


def plot_fidelity_curve(curve, path, title: str | None = None, milestone: float = 0.999):
    """Fidelity against the number of measured settings.

    ``curve`` holds (l, F_prev, F_target) rows; F_target may be None.
    """
    ls = [c[0] for c in curve]
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(FIG_WIDTH, 2 * FIG_WIDTH * GOLDEN * 0.7))
    targets = [c[2] for c in curve]
    ax = axes[0]
    if any(t is not None for t in targets):
        ax.plot(ls, [t if t is not None else float("nan") for t in targets], "o-", ms=3)
        ax.axhline(milestone, color="0.6", lw=0.8, ls="--")
    ax.set_ylabel("F(rho_l, rho_target)")
    if title:
        ax.set_title(title)
    axes[1].plot(ls, [c[1] for c in curve], "s-", ms=3, color="C1")
    axes[1].set_ylabel("F(rho_l, rho_l-1)")
    axes[1].set_xlabel("settings measured, l")
    for a in axes:
        a.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_cost_comparison(labels, costs, path):
    """Grouped bars of projective measurements per method, one group per state.

    ``costs`` maps method name to a list of measurement counts aligned with ``labels``.
    """
    fig, ax = plt.subplots(figsize=(FIG_WIDTH, FIG_WIDTH * GOLDEN))
    width = 0.8 / max(len(costs), 1)
    for k, (method, values) in enumerate(costs.items()):
        xs = [i + (k - (len(costs) - 1) / 2) * width for i in range(len(labels))]
        ax.bar(xs, values, width=width, label=method)
    ax.set_yscale("log")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel("projective measurements M")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path

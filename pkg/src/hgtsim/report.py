"""Figure rendering for run directories.

Draws the standard diagnostics from a summary document: expected-output and
regret trajectories with cross-replication dispersion, the false-labeling
curve, and per-cell histograms of posterior means after selected batches.
Files are written as PNG next to the delimited outputs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_HIST_SHADES = ["#9ecae1", "#4292c6", "#08519c"]


def _batches(summary: dict) -> np.ndarray:
    return np.array([row["batch"] for row in summary["per_batch"]])


def render_production(summary: dict, path: Path) -> None:
    rows = summary["per_batch"]
    b = _batches(summary)
    hgt = np.array([row["hgt_expected_mean"] for row in rows], dtype=float)
    sd = np.array([row["hgt_expected_sd"] or 0.0 for row in rows], dtype=float)
    oracle = np.array([row["oracle_expected_mean"] for row in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.errorbar(b, hgt, yerr=sd, color="tab:blue", marker="o", capsize=3,
                ecolor="black", elinewidth=0.8, label="adaptive policy")
    ax.plot(b, oracle, color="tab:orange", marker="s", label="oracle")
    ax.set_xlabel("batch")
    ax.set_ylabel("expected output")
    ax.set_xticks(b)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_regret(summary: dict, path: Path) -> None:
    rows = summary["per_batch"]
    b = _batches(summary)
    reg = np.array([row["regret_abs_mean"] for row in rows], dtype=float)
    sd = np.array([row["regret_abs_sd"] or 0.0 for row in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.errorbar(b, reg, yerr=sd, color="tab:blue", marker="o", capsize=3,
                ecolor="black", elinewidth=0.8)
    ax.axhline(0.0, color="gray", lw=0.8, ls=":")
    ax.set_xlabel("batch")
    ax.set_ylabel("regret (expected output gap)")
    ax.set_xticks(b)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_flr(summary: dict, path: Path) -> None:
    rows = summary["per_batch"]
    b = _batches(summary)
    flr = 100.0 * np.array([row["flr_mean"] for row in rows], dtype=float)
    sd = 100.0 * np.array([row["flr_sd"] or 0.0 for row in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.errorbar(b, flr, yerr=sd, color="tab:blue", marker="o", capsize=3,
                ecolor="black", elinewidth=0.8)
    ax.set_xlabel("batch")
    ax.set_ylabel("false labeling rate (%)")
    ax.set_xticks(b)
    ax.set_ylim(bottom=0)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_posterior_histograms(summary: dict, theta_true, path: Path) -> None:
    """Per-cell posterior-mean histograms after early/middle/final batches."""
    hists = summary["posterior_mean_histograms"]
    cells = sorted(hists.keys(), key=lambda s: tuple(int(x) for x in s.split(",")))
    n_batches = len(summary["per_batch"])
    picks = sorted({1, min(3, n_batches), n_batches})
    width = summary["histogram_bin_width"]
    edges = np.arange(0.0, 1.0 + width / 2, width)
    fig, axes = plt.subplots(1, len(cells), figsize=(2.6 * len(cells), 2.8), squeeze=False)
    for ax, cell in zip(axes[0], cells):
        for shade, t in zip(_HIST_SHADES, picks):
            counts = hists[cell][t - 1]
            ax.stairs(counts, edges, fill=True, alpha=0.55, color=shade,
                      label=f"batch {t}")
        a, b = (int(x) for x in cell.split(","))
        if theta_true is not None:
            ax.axvline(float(theta_true[a - 1][b - 1]), color="gray", ls=":", lw=1.0)
        lo = min((i for c in picks for i, v in enumerate(hists[cell][c - 1]) if v), default=0)
        hi = max((i for c in picks for i, v in enumerate(hists[cell][c - 1]) if v), default=99)
        ax.set_xlim(max(0.0, (lo - 5) * width), min(1.0, (hi + 6) * width))
        ax.set_title(f"cell ({a},{b})", fontsize=9)
        ax.set_yticks([])
    axes[0][0].legend(frameon=False, fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_all(summary: dict, theta_true, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, fn in (
        ("production.png", lambda p: render_production(summary, p)),
        ("regret.png", lambda p: render_regret(summary, p)),
        ("flr.png", lambda p: render_flr(summary, p)),
        ("posterior_histograms.png", lambda p: render_posterior_histograms(summary, theta_true, p)),
    ):
        path = out_dir / name
        fn(path)
        paths.append(path)
    return paths

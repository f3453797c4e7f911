"""Figure rendering: PNG charts written next to the jsonl reports.

Everything renders through the Agg backend so commands work headless; each
function writes one file and returns its path.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .corpus import CorpusStats, CorrelationMatrix  # noqa: E402
from .metrics import STAT_FIELDS, EvalResult  # noqa: E402

DPI = 120


def stats_figure(stats_by_name: Sequence[tuple[str, CorpusStats]], path) -> Path:
    path = Path(path)
    metrics = [metric for metric, _ in STAT_FIELDS]
    fig, ax = plt.subplots(figsize=(7, 4))
    group_width = 0.8
    bar_width = group_width / max(len(stats_by_name), 1)
    for i, (name, stats) in enumerate(stats_by_name):
        values = [getattr(stats, attr) for _, attr in STAT_FIELDS]
        offsets = [j - group_width / 2 + (i + 0.5) * bar_width for j in range(len(metrics))]
        bars = ax.bar(offsets, values, width=bar_width * 0.9, label=name)
        ax.bar_label(bars, fontsize=7)
    ax.set_xticks(range(len(metrics)))
    ax.set_xticklabels([m.replace("_", "\n") for m in metrics])
    ax.set_ylabel("count")
    ax.set_title("Corpus statistics")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def correlation_figure(matrix: CorrelationMatrix, path) -> Path:
    path = Path(path)
    labels = list(matrix.labels)
    grid = [counts for _, counts in matrix.rows()]
    fig, ax = plt.subplots(figsize=(1.0 + 0.75 * len(labels), 0.8 + 0.7 * len(labels)))
    image = ax.imshow(grid, cmap="Blues")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels)
    ax.set_xlabel("outside (containing) label")
    ax.set_ylabel("inside (nested) label")
    peak = max((max(row) for row in grid), default=0)
    for i, row in enumerate(grid):
        for j, value in enumerate(row):
            color = "white" if peak and value > peak * 0.6 else "black"
            ax.text(j, i, str(value), ha="center", va="center", fontsize=7, color=color)
    fig.colorbar(image, ax=ax, shrink=0.8)
    ax.set_title("Label nesting correlation")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def eval_figure(result: EvalResult, path) -> Path:
    path = Path(path)
    labels = list(result.per_label)
    scores = [100 * result.per_label[label].f1 for label in labels]
    fig, ax = plt.subplots(figsize=(7, 4))
    bars = ax.bar(range(len(labels)), scores)
    ax.bar_label(bars, fmt="%.1f", fontsize=7)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.axhline(100 * result.micro.f1, linestyle="--", linewidth=1, color="tab:orange",
               label=f"micro F1 {100 * result.micro.f1:.2f}")
    ax.axhline(100 * result.macro_f1, linestyle=":", linewidth=1, color="tab:green",
               label=f"macro F1 {100 * result.macro_f1:.2f}")
    ax.set_ylim(0, 105)
    ax.set_ylabel("F1 (%)")
    ax.set_title("Span F1 by label")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def sweep_figure(rows: Sequence[tuple[float, float, float]], path) -> Path:
    """rows: (silver share, micro F1, macro F1), already sorted by share."""
    path = Path(path)
    shares = [row[0] for row in rows]
    micro = [100 * row[1] for row in rows]
    macro = [100 * row[2] for row in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(shares, micro, marker="o", label="F micro")
    ax.plot(shares, macro, marker="s", label="F macro")
    ax.set_xlabel("kept share of silver samples")
    ax.set_ylabel("F1 (%)")
    ax.set_title("Silver share sweep")
    ax.grid(True, linewidth=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def pll_figure(kept: Sequence[float], dropped: Sequence[float], path) -> Path:
    """Fluency distribution of silver samples, split by selection outcome."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    values = list(kept) + list(dropped)
    if values:
        lo, hi = min(values), max(values)
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        bins = 20
        ax.hist([list(kept), list(dropped)], bins=bins, range=(lo, hi),
                stacked=True, label=["kept", "dropped"],
                color=["tab:blue", "tab:gray"])
        if kept:
            ax.axvline(min(kept), linestyle="--", linewidth=1, color="tab:red",
                       label="selection cut")
    ax.set_xlabel("mean per-token log-probability")
    ax.set_ylabel("silver samples")
    ax.set_title("Silver sample fluency")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path

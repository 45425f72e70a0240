"""Figure rendering for table reports.

Two figures per report: grouped bars of cell means per row, and a
histogram of the pooled per-trial residuals.  Both are written as PNG
files next to the delimited output; everything is headless (Agg).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _row_label(key: dict) -> str:
    return ",".join(f"{k}={v}" for k, v in key.items())


def table_means_figure(report, path) -> Path:
    """Grouped log-scale bars: one group per row, one bar per cell."""
    rows = report.rows
    labels = [_row_label(r.key) for r in rows]
    cell_names = []
    for r in rows:  # ordered union; rows need not share cell labels
        cell_names.extend(c for c in r.cells if c not in cell_names)
    width = max(6.0, 0.9 + 0.45 * len(rows) * max(1, len(cell_names)))
    fig, ax = plt.subplots(figsize=(width, 4.2))
    x = np.arange(len(rows), dtype=float)
    bar = 0.8 / max(1, len(cell_names))
    for ci, cell in enumerate(cell_names):
        means = [r.cells[cell].mean if cell in r.cells else np.nan
                 for r in rows]
        ax.bar(x + (ci - (len(cell_names) - 1) / 2.0) * bar, means,
               width=bar * 0.92, label=cell)
    if report.bracket:
        for edge in report.bracket:
            ax.axhline(edge, color="0.35", linestyle="--", linewidth=0.8)
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("mean residual norm")
    ax.set_title(f"table {report.table_id} ({report.scale}, "
                 f"{report.trials} trials)")
    if len(cell_names) > 1:
        ax.legend(fontsize=8, ncols=min(4, len(cell_names)))
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def table_deltas_figure(report, path) -> Path:
    """Histogram of every per-trial residual in the report, log bins."""
    deltas = np.array([d for row in report.rows
                       for rep in row.cells.values()
                       for d in rep.deltas])
    deltas = deltas[deltas > 0.0]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    if deltas.size:
        lo, hi = deltas.min(), deltas.max()
        if lo == hi:
            lo, hi = lo * 0.5, hi * 2.0
        bins = np.logspace(np.log10(lo), np.log10(hi), 41)
        ax.hist(deltas, bins=bins, color="#4878a8")
        ax.set_xscale("log")
    if report.bracket:
        for edge in report.bracket:
            ax.axvline(edge, color="0.35", linestyle="--", linewidth=0.8)
    ax.set_xlabel("per-trial residual norm")
    ax.set_ylabel("count")
    ax.set_title(f"table {report.table_id}: residual distribution")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_table_figures(report, out_base) -> list:
    """Write the report's figures as <out_base>_means.png and
    <out_base>_deltas.png; returns the written paths."""
    base = Path(out_base)
    return [
        table_means_figure(report, base.with_name(base.name + "_means.png")),
        table_deltas_figure(report, base.with_name(base.name + "_deltas.png")),
    ]

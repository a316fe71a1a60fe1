"""Figure rendering for monitor runs and reproduced tables.

Files only (Agg backend); the CLI writes these next to its delimited
output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_monitor_figure", "save_table_figure"]


def save_monitor_figure(path, series, report, thresholds=None, dpi=120):
    """Observed series above, chart statistics below, episodes shaded.

    thresholds maps chart label to its alarm threshold; a two-sided chart
    gets both +-b lines drawn (the sign of the statistic trace shows which
    side fired).
    """
    series = np.asarray(series, dtype=float)
    labels = sorted({r.chart for r in report.records})
    fig, (ax0, ax1) = plt.subplots(
        2, 1, figsize=(10, 6), sharex=True, height_ratios=[1, 1.4]
    )
    ax0.plot(np.arange(1, series.size + 1), series, lw=0.8, color="0.25")
    ax0.set_ylabel("series")
    for ep in report.episodes:
        for ax in (ax0, ax1):
            ax.axvspan(ep.start, ep.end, color="tab:red", alpha=0.15, lw=0)
    for label in labels:
        recs = [r for r in report.records if r.chart == label]
        t = [r.t for r in recs]
        s = [r.statistic for r in recs]
        (line,) = ax1.plot(t, s, lw=0.9, label=label)
        alarmed = [(r.t, r.statistic) for r in recs if r.alarm]
        if alarmed:
            ax1.scatter(*zip(*alarmed), s=12, color=line.get_color(), zorder=3)
        if thresholds and label in thresholds:
            b = thresholds[label]
            ax1.axhline(b, color=line.get_color(), ls="--", lw=0.7, alpha=0.7)
            two_sided = any(r.direction is not None for r in recs) or any(
                v < 0 for v in s if v == v
            )
            if two_sided:
                ax1.axhline(-b, color=line.get_color(), ls="--", lw=0.7, alpha=0.7)
    ax1.set_xlabel("t")
    ax1.set_ylabel("statistic")
    ax1.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path


def save_table_figure(path, artifact, dpi=120):
    """Render a reproduced grid: heatmap for the two-way table, line panels
    (estimates solid, published values dashed) otherwise."""
    if artifact.table_id == 5:
        mus = [row.signal_label for row in artifact.rows]
        grid = np.array([[e.p_hat for e in row.estimates] for row in artifact.rows])
        fig, ax = plt.subplots(figsize=(8, 6.5))
        im = ax.imshow(grid, origin="lower", cmap="viridis", vmin=0.0, vmax=1.0)
        ax.set_xticks(range(len(artifact.column_labels)))
        ax.set_xticklabels(artifact.column_labels, rotation=45, fontsize=8)
        ax.set_yticks(range(len(mus)))
        ax.set_yticklabels(mus, fontsize=8)
        ax.set_xlabel("variance level")
        ax.set_ylabel("mean level")
        for i in range(grid.shape[0]):
            for j in range(grid.shape[1]):
                ax.text(
                    j, i, f"{grid[i, j]:.3f}", ha="center", va="center",
                    color="white" if grid[i, j] < 0.6 else "black", fontsize=6,
                )
        fig.colorbar(im, ax=ax, label="detection probability")
        fig.tight_layout()
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        return path

    blocks = []
    for row in artifact.rows:
        if not blocks or blocks[-1][0] != row.block:
            blocks.append((row.block, []))
        blocks[-1][1].append(row)
    fig, axes = plt.subplots(
        1, len(blocks), figsize=(4.5 * len(blocks), 4.2), squeeze=False, sharey=True
    )
    for ax, (block, rows) in zip(axes[0], blocks):
        x = np.arange(len(rows))
        for j, label in enumerate(artifact.column_labels):
            est = [r.estimates[j].p_hat for r in rows]
            ref = [r.printed[j] for r in rows]
            (line,) = ax.plot(x, est, marker="o", ms=3, lw=1.0, label=label)
            ax.plot(x, ref, ls="--", lw=0.8, color=line.get_color(), alpha=0.6)
        ax.set_xticks(x)
        ax.set_xticklabels([r.signal_label for r in rows], rotation=45, fontsize=7)
        ax.set_xlabel("signal level")
        if block is not None:
            ax.set_title(f"L = {block}", fontsize=9)
    axes[0][0].set_ylabel("alarm probability")
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path

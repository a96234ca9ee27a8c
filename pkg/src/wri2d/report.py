"""Merge metrics logs from several runs into one aligned comparison CSV
and render quick-look convergence figures next to it."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import gridio
from .errors import ValidationError

_SERIES = ("data_residual", "wave_residual", "model_error", "wavefield_error",
           "tv", "objective_J")


def merge_metrics(paths: list, labels: list[str] | None = None) -> tuple[list[str], np.ndarray]:
    """Align several metrics CSVs on the iteration column.

    Returns (column names, table) where the table has max(input rows) rows
    and nan marks exhausted shorter runs.
    """
    if not paths:
        raise ValidationError("no metrics files given")
    if labels is None:
        labels = []
        for p in paths:
            stem = Path(p).stem
            label = stem
            k = 2
            while label in labels:
                label = f"{stem}_{k}"
                k += 1
            labels.append(label)
    if len(labels) != len(paths):
        raise ValidationError("need one label per metrics file")

    tables = [gridio.read_metrics_csv(p) for p in paths]
    n_rows = max(len(t["iter"]) for t in tables)
    names = ["iter"]
    cols = [np.arange(1, n_rows + 1, dtype=float)]
    for label, t in zip(labels, tables):
        for series in _SERIES:
            if series not in t:
                continue
            col = np.full(n_rows, np.nan)
            col[: len(t[series])] = t[series]
            names.append(f"{label}_{series}")
            cols.append(col)
    return names, np.column_stack(cols)


def write_merged_csv(path, names: list[str], table: np.ndarray) -> None:
    lines = [",".join(names)]
    for row in table:
        cells = []
        for name, v in zip(names, row):
            if name == "iter":
                cells.append(str(int(v)))
            else:
                cells.append("" if np.isnan(v) else f"{v:.17g}")
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def render_figures(paths: list, labels: list[str], out_dir) -> list[Path]:
    """Residual histories, the residual plane (shared log scales), and the
    TV history, as PNG files. Best-effort styling; not an accuracy surface."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = [gridio.read_metrics_csv(p) for p in paths]
    written = []

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    for label, t in zip(labels, tables):
        axes[0].semilogy(t["iter"], t["data_residual"], label=label)
        axes[1].semilogy(t["iter"], t["wave_residual"], label=label)
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("data residual")
    axes[1].set_xlabel("iteration")
    axes[1].set_ylabel("wave-equation residual")
    axes[0].legend(fontsize=7)
    fig.tight_layout()
    p = out_dir / "report_residuals.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    written.append(p)

    fig, ax = plt.subplots(figsize=(4.5, 4.2))
    lo, hi = np.inf, -np.inf
    for label, t in zip(labels, tables):
        ax.loglog(t["data_residual"], t["wave_residual"], marker=".", label=label)
        both = np.concatenate([t["data_residual"], t["wave_residual"]])
        both = both[np.isfinite(both) & (both > 0)]
        if both.size:
            lo, hi = min(lo, both.min()), max(hi, both.max())
    if np.isfinite(lo) and np.isfinite(hi):
        ax.set_xlim(lo * 0.5, hi * 2)
        ax.set_ylim(lo * 0.5, hi * 2)
    ax.set_xlabel("data residual")
    ax.set_ylabel("wave-equation residual")
    ax.set_aspect("equal")
    ax.legend(fontsize=7)
    fig.tight_layout()
    p = out_dir / "report_residual_plane.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    written.append(p)

    if any("tv" in t for t in tables):
        fig, ax = plt.subplots(figsize=(5, 3.4))
        for label, t in zip(labels, tables):
            if "tv" in t:
                ax.plot(t["iter"], t["tv"], label=label)
        ax.set_xlabel("iteration")
        ax.set_ylabel("model TV")
        ax.legend(fontsize=7)
        fig.tight_layout()
        p = out_dir / "report_tv.png"
        fig.savefig(p, dpi=150)
        plt.close(fig)
        written.append(p)
    return written

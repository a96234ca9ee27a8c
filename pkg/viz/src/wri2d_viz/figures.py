"""Figure builders: heatmaps with profile insets, convergence planes,
and TV histories. Readers only; inputs are never modified."""

from __future__ import annotations

import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .readers import (  # noqa: E402
    FormatError,
    isotropic_tv_of_velocity,
    read_manifest,
    read_metrics,
    read_velocity_grid,
)

DPI = 150


def _profile_index(coord: float, spacing: float, count: int, axis: str) -> int:
    idx = int(round(coord / spacing))
    if idx < 0 or idx >= count:
        raise FormatError(
            f"profile {axis}={coord} outside grid extent [0, {(count - 1) * spacing}]"
        )
    return idx


def plot_model(
    model_path,
    out_path,
    truth_path=None,
    initial_path=None,
    profile_x: float | None = None,
    profile_z: float | None = None,
) -> Path:
    """Velocity heatmap with crossing profiles.

    When a truth (and optionally an initial) model is given, the profile
    panels overlay truth as solid black, initial as dashed blue, and the
    plotted model as red.
    """
    header, v = read_velocity_grid(model_path)
    nz, nx, dz, dx = header["nz"], header["nx"], header["dz"], header["dx"]
    if profile_x is None:
        profile_x = (nx - 1) * dx / 2.0
    if profile_z is None:
        profile_z = (nz - 1) * dz / 2.0
    ix = _profile_index(profile_x, dx, nx, "x")
    iz = _profile_index(profile_z, dz, nz, "z")

    overlays = []
    if truth_path is not None:
        overlays.append(("true", read_velocity_grid(truth_path)[1], "k-"))
    if initial_path is not None:
        overlays.append(("initial", read_velocity_grid(initial_path)[1], "b--"))
    overlays.append(("model", v, "r-"))

    fig = plt.figure(figsize=(8.2, 5.2))
    gs = fig.add_gridspec(2, 2, width_ratios=(1, 3.2), height_ratios=(2.4, 1),
                          hspace=0.35, wspace=0.3)
    ax_map = fig.add_subplot(gs[0, 1])
    ax_v = fig.add_subplot(gs[0, 0])
    ax_h = fig.add_subplot(gs[1, 1])

    extent = (0.0, (nx - 1) * dx / 1000.0, (nz - 1) * dz / 1000.0, 0.0)
    im = ax_map.imshow(v / 1000.0, extent=extent, aspect="equal", cmap="viridis")
    ax_map.axvline(profile_x / 1000.0, color="w", lw=0.6, ls=":")
    ax_map.axhline(profile_z / 1000.0, color="w", lw=0.6, ls=":")
    ax_map.set_xlabel("x (km)")
    ax_map.set_ylabel("z (km)")
    fig.colorbar(im, ax=ax_map, label="v (km/s)", shrink=0.9)

    z_axis = np.arange(nz) * dz / 1000.0
    x_axis = np.arange(nx) * dx / 1000.0
    for label, arr, style in overlays:
        if arr.shape != v.shape:
            raise FormatError(f"overlay {label!r} has shape {arr.shape}, "
                              f"expected {v.shape}")
        ax_v.plot(arr[:, ix] / 1000.0, z_axis, style, label=label, lw=1.1)
        ax_h.plot(x_axis, arr[iz, :] / 1000.0, style, label=label, lw=1.1)
    ax_v.invert_yaxis()
    ax_v.set_xlabel("v (km/s)")
    ax_v.set_ylabel("z (km)")
    ax_v.legend(fontsize=6)
    ax_h.set_xlabel("x (km)")
    ax_h.set_ylabel("v (km/s)")

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)
    return out_path


def plot_convergence(
    metrics_paths,
    out_path,
    kind: str = "residual_plane",
    labels=None,
    truth_tv: float | None = None,
) -> Path:
    """Convergence figure from one or more metrics CSVs.

    ``residual_plane`` and ``error_plane`` draw trajectories on identical
    logarithmic scales on both axes; ``tv_history`` draws the TV per
    iteration with an optional dashed black reference level.
    """
    if kind not in ("residual_plane", "error_plane", "tv_history"):
        raise FormatError(f"unknown figure kind {kind!r}")
    tables = [read_metrics(p) for p in metrics_paths]
    if labels is None:
        labels = [Path(p).parent.name or Path(p).stem for p in metrics_paths]

    fig, ax = plt.subplots(figsize=(4.8, 4.4))
    if kind in ("residual_plane", "error_plane"):
        xcol, ycol = (("data_residual", "wave_residual")
                      if kind == "residual_plane"
                      else ("model_error", "wavefield_error"))
        lo, hi = np.inf, -np.inf
        for label, t in zip(labels, tables):
            x = t.get(xcol)
            y = t.get(ycol)
            if x is None or y is None or not np.any(np.isfinite(x)):
                warnings.warn(f"{label}: no {xcol}/{ycol} columns; skipped")
                continue
            ax.loglog(x, y, marker=".", ms=3, lw=0.9, label=label)
            ax.plot(x[:1], y[:1], "k>", ms=6)  # starting point
            both = np.concatenate([x, y])
            both = both[np.isfinite(both) & (both > 0)]
            if both.size:
                lo, hi = min(lo, both.min()), max(hi, both.max())
        if np.isfinite(lo):
            ax.set_xlim(lo * 0.5, hi * 2.0)
            ax.set_ylim(lo * 0.5, hi * 2.0)
        ax.set_aspect("equal")
        ax.set_xlabel(xcol.replace("_", " "))
        ax.set_ylabel(ycol.replace("_", " "))
    else:
        for label, t in zip(labels, tables):
            ax.plot(t["iter"], t["tv"], lw=1.1, label=label)
        if truth_tv is not None:
            ax.axhline(truth_tv, color="k", ls="--", lw=1.0, label="true model")
        ax.set_xlabel("iteration")
        ax.set_ylabel("model TV")
    ax.legend(fontsize=6)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)
    return out_path


def plot_all(run_dir, out_dir=None) -> list[Path]:
    """Render every figure the run directory supports.

    Reads manifest.json to locate the initial/true models; emits the model
    heatmap always, convergence figures only when metrics.csv is present
    (with a warning otherwise). Reruns overwrite the same file names.
    """
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir else run_dir
    manifest = read_manifest(run_dir / "manifest.json")
    cfg = manifest["config"]
    written = []

    model_file = run_dir / "final_model.bin"
    truth = cfg.get("true_model")
    initial = cfg.get("initial_model")
    truth = truth if truth and Path(truth).exists() else None
    initial = initial if initial and Path(initial).exists() else None
    written.append(plot_model(model_file, out_dir / "fig_model.png",
                              truth_path=truth, initial_path=initial))

    metrics = run_dir / "metrics.csv"
    if not metrics.exists():
        warnings.warn(f"{metrics} missing: heatmap only")
        return written

    written.append(plot_convergence([metrics], out_dir / "fig_residual_plane.png",
                                    kind="residual_plane"))
    cols = read_metrics(metrics)
    if np.any(np.isfinite(cols.get("model_error", np.array([np.nan])))):
        written.append(plot_convergence([metrics], out_dir / "fig_error_plane.png",
                                        kind="error_plane"))
    truth_tv = isotropic_tv_of_velocity(read_velocity_grid(truth)[1]) if truth else None
    written.append(plot_convergence([metrics], out_dir / "fig_tv_history.png",
                                    kind="tv_history", truth_tv=truth_tv))
    return written

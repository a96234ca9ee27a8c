"""Run an inversion from a resolved configuration: load inputs, wire the
operators and schedule, drive the solver, and emit the final model,
metrics CSV, and manifest."""

from __future__ import annotations

from pathlib import Path

from . import gridio
from .config import resolve_config
from .errors import ValidationError
from .helmholtz import PmlProfile
from .inversion import Inversion, PenaltyConfig
from .model import Bounds, slowness2_to_velocity
from .schedule import BatchSchedule, make_schedule, simultaneous_schedule
from .survey import build_operators


def schedule_from_config(sched_cfg: dict) -> BatchSchedule:
    if sched_cfg["kind"] == "simultaneous":
        return simultaneous_schedule(
            sched_cfg["frequencies"],
            k_max=sched_cfg["k_max"],
            eps_b=sched_cfg["eps_b"],
            eps_d=sched_cfg["eps_d"],
        )
    return make_schedule(
        sched_cfg["f_start"],
        sched_cfg["f_end"],
        sched_cfg["df"],
        sched_cfg["batch_size"],
        sched_cfg["overlap"],
        k_max=sched_cfg["k_max"],
        eps_b=sched_cfg["eps_b"],
        eps_d=sched_cfg["eps_d"],
        eps_d_from_noise=sched_cfg["eps_d_from_noise"],
        paths=[tuple(p) for p in sched_cfg["paths"]],
    )


def penalty_from_config(pen_cfg: dict) -> PenaltyConfig:
    return PenaltyConfig(**pen_cfg)


def run_from_config(cfg: dict) -> dict:
    """Execute a resolved config; returns the emitted file paths."""
    cfg = resolve_config(cfg)

    initial = gridio.read_model_file(cfg["initial_model"])
    survey, dataset, data_grid, data_pml = gridio.read_dataset(cfg["data_dir"])
    if data_grid != initial.grid:
        raise ValidationError(
            f"initial model grid {initial.grid} does not match data grid {data_grid}"
        )

    truth = None
    if cfg["true_model"]:
        truth = gridio.read_model_file(cfg["true_model"])

    bounds = None
    if cfg["bounds_on"]:
        if cfg["bounds"] is not None:
            bounds = Bounds.from_velocity(
                initial.grid, cfg["bounds"]["v_min"], cfg["bounds"]["v_max"]
            )
        else:
            bounds = Bounds.from_model(truth)

    pml = data_pml
    if cfg["pml"] is not None:
        pml = PmlProfile(**cfg["pml"])
    if pml.sigma_max is None:
        v_scale = float(slowness2_to_velocity(initial).max())
        pml = PmlProfile(pml.n_pml, pml.resolve_sigma_max(initial.grid, v_scale),
                         pml.exponent)
    resolved_pml = {"n_pml": pml.n_pml, "sigma_max": pml.sigma_max,
                    "exponent": pml.exponent}
    cfg["pml"] = resolved_pml

    sched = schedule_from_config(cfg["schedule"])
    needed = sched.all_frequencies()
    have = survey.frequencies
    for f in needed:
        if not any(abs(f - g) < 1e-9 for g in have):
            raise ValidationError(f"schedule needs {f} Hz but the data set lacks it")

    operators = build_operators(initial.grid, survey.frequencies, pml,
                                v_max=1.0)  # sigma_max already resolved
    solver = Inversion(
        grid=initial.grid,
        survey=survey,
        dataset=dataset,
        operators=operators,
        initial=initial,
        config=penalty_from_config(cfg["penalty"]),
        mode=cfg["mode"],
        bounds_on=cfg["bounds_on"],
        tv_on=cfg["tv_on"],
        bounds=bounds,
        truth=truth,
        backend=cfg["solver_backend"],
        threads=cfg["threads"],
        seed=cfg["seed"],
    )
    final, metrics = solver.run(sched)

    out_dir = Path(cfg["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = out_dir / "final_model.bin"
    metrics_path = out_dir / "metrics.csv"
    manifest_path = out_dir / "manifest.json"
    gridio.write_model_file(model_path, final)
    gridio.write_metrics_csv(metrics_path, metrics)
    gridio.write_manifest(
        manifest_path,
        cfg,
        extra={"schedule_batches": [list(b) for b in sched.batches],
               "iterations_performed": len(metrics)},
    )
    return {
        "final_model": model_path,
        "metrics": metrics_path,
        "manifest": manifest_path,
    }

"""Canned experiment setups: the desk-scale inclusion benchmark and the
two salt-model continuation recipes (which require user-supplied velocity
grids and are not run by the automated tests).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import gridio
from .helmholtz import PmlProfile
from .model import Grid, make_inclusion_model
from .survey import Survey


def inclusion_grid() -> Grid:
    """1.5 km x 1.0 km at 10 m spacing."""
    return Grid(nz=101, nx=151, dz=10.0, dx=10.0)


def inclusion_survey(grid: Grid, pml: PmlProfile) -> Survey:
    """Five sources and 65 receivers along the top edge of the physical
    (non-absorbing) region, inverting 2.5, 5 and 7 Hz simultaneously."""
    z_top = pml.n_pml * grid.dz
    x_lo = pml.n_pml * grid.dx
    x_hi = (grid.nx - 1 - pml.n_pml) * grid.dx
    receivers = tuple((x, z_top) for x in np.linspace(x_lo, x_hi, 65))
    sources = tuple((x, z_top) for x in np.linspace(x_lo, x_hi, 5))
    return Survey(
        sources=sources,
        receivers=receivers,
        frequencies=(2.5, 5.0, 7.0),
        ricker_f_dom_hz=5.0,
    )


def write_inclusion_models(out_dir) -> dict[str, Path]:
    """Emit the true/gradient/homogeneous inclusion models as grid files."""
    out_dir = Path(out_dir)
    truth, gradient, homogeneous = make_inclusion_model(inclusion_grid())
    paths = {}
    for name, m in (
        ("true", truth),
        ("gradient_start", gradient),
        ("homogeneous_start", homogeneous),
    ):
        p = out_dir / f"inclusion_{name}.bin"
        gridio.write_model_file(p, m)
        paths[name] = p
    return paths


def inclusion_config(
    mode: str,
    priors: str,
    start: str,
    model_dir,
    data_dir,
    output_dir,
    iterations: int = 70,
    seed: int = 0,
) -> dict:
    """Config dict for one cell of the six-way comparison grid.

    ``priors`` is one of none/bounds/btv; ``start`` gradient or homogeneous.
    The gradient start keeps the splitting weights constant at 0.01 zeta
    units; the homogeneous start decays them from 1 to 0.01 by factor 2
    every 10 iterations and stabilizes the model system with 0.01 zeta
    damping.
    """
    if priors not in ("none", "bounds", "btv"):
        raise ValueError(f"unknown priors {priors!r}")
    if start not in ("gradient", "homogeneous"):
        raise ValueError(f"unknown start {start!r}")
    model_dir = Path(model_dir)
    crude_start = start == "homogeneous"
    penalty = {
        "lambda_frac": 1e-5,
        "alpha": 0.5,
        "gamma_init": 1.0 if crude_start else 0.01,
        "gamma_floor": 0.01,
        "gamma_decay_every": 10,
        "gamma_decay_factor": 2.0 if crude_start else 1.0,
        "damping_frac": 0.01 if crude_start else 0.0,
    }
    return {
        "initial_model": str(model_dir / f"inclusion_{start}_start.bin"),
        "true_model": str(model_dir / "inclusion_true.bin"),
        "data_dir": str(data_dir),
        "output_dir": str(output_dir),
        "mode": mode,
        "bounds_on": priors in ("bounds", "btv"),
        "tv_on": priors == "btv",
        "bounds": None,  # derived from the true model: its min/max squared slowness
        "penalty": penalty,
        "schedule": {
            "kind": "simultaneous",
            "frequencies": [2.5, 5.0, 7.0],
            "k_max": iterations,
        },
        "seed": seed,
    }


def bp_central_configs(
    true_model_path: str,
    initial_model_path: str,
    data_dir_mono: str,
    data_dir_band: str,
    output_root: str,
    mode: str = "irwri",
    seed: int = 0,
) -> tuple[dict, dict]:
    """Two-stage recipe for the central salt target (user-supplied grids).

    Stage 1 inverts the 3 Hz component alone for 70 iterations with
    decaying splitting weights, damping, and bounds activated after 21
    iterations. Stage 2 continues from 3.5 to 12 Hz in two-frequency
    batches overlapping by one, constant small weights, no damping.
    """
    out = Path(output_root)
    stage1 = {
        "initial_model": initial_model_path,
        "true_model": true_model_path,
        "data_dir": data_dir_mono,
        "output_dir": str(out / "stage1_3hz"),
        "mode": mode,
        "bounds_on": True,
        "tv_on": True,
        "bounds": None,
        "penalty": {
            "gamma_init": 1.0,
            "gamma_floor": 0.01,
            "gamma_decay_every": 10,
            "gamma_decay_factor": 2.0,
            "damping_frac": 0.01,
            "bounds_start_iter": 21,
        },
        "schedule": {"kind": "simultaneous", "frequencies": [3.0], "k_max": 70},
        "seed": seed,
    }
    stage2 = {
        "initial_model": str(out / "stage1_3hz" / "final_model.bin"),
        "true_model": true_model_path,
        "data_dir": data_dir_band,
        "output_dir": str(out / "stage2_band"),
        "mode": mode,
        "bounds_on": True,
        "tv_on": True,
        "bounds": None,
        "penalty": {
            "gamma_init": 0.01,
            "gamma_floor": 0.01,
            "gamma_decay_factor": 1.0,
            "damping_frac": 0.0,
        },
        "schedule": {
            "kind": "batched",
            "f_start": 3.5,
            "f_end": 12.0,
            "df": 0.5,
            "batch_size": 2,
            "overlap": 1,
            "k_max": 15,
            "eps_b": 1e-3,
            "eps_d": 1e-5,
        },
        "seed": seed,
    }
    return stage1, stage2


def bp_left_config(
    true_model_path: str,
    initial_model_path: str,
    data_dir: str,
    output_dir: str,
    noisy: bool = False,
    seed: int = 0,
) -> dict:
    """Left salt target: 3 to 13 Hz in overlapping pairs, three passes
    restarting at 3, 6 and 8.5 Hz, each warm-started from the previous
    final model. Noisy data use the per-batch injected-noise norm as the
    data tolerance and a larger wave-equation weight fraction."""
    return {
        "initial_model": initial_model_path,
        "true_model": true_model_path,
        "data_dir": data_dir,
        "output_dir": output_dir,
        "mode": "irwri",
        "bounds_on": True,
        "tv_on": True,
        "bounds": None,
        "penalty": {
            "lambda_frac": 1e-3 if noisy else 1e-5,
            "gamma_init": 0.01,
            "gamma_floor": 0.01,
            "gamma_decay_factor": 1.0,
        },
        "schedule": {
            "kind": "batched",
            "f_start": 3.0,
            "f_end": 13.0,
            "df": 0.5,
            "batch_size": 2,
            "overlap": 1,
            "k_max": 15,
            "eps_b": 1e-3,
            "eps_d": 0.0 if noisy else 1e-5,
            "eps_d_from_noise": noisy,
            "paths": [[3.0, 1], [6.0, 2], [8.5, 3]],
        },
        "seed": seed,
    }

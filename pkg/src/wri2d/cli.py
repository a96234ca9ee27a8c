"""Command-line front end.

Subcommands: ``model`` builds or re-emits velocity grids, ``forward``
synthesizes data, ``invert`` runs an inversion from a JSON config, and
``report`` merges metrics logs into a comparison CSV with figures.

Exit codes: 0 success, 2 validation/config, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments, gridio, report
from .config import load_config
from .errors import NumericalError, ValidationError
from .helmholtz import PmlProfile
from .model import Grid, make_inclusion_model, slowness2_to_velocity
from .runner import run_from_config
from .survey import add_noise, forward_model

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _cmd_model(args) -> int:
    out = Path(args.out)
    if args.kind == "import":
        if not args.source:
            raise ValidationError("--from is required for kind 'import'")
        header, values = gridio.read_grid(args.source)
        gridio.write_grid(out, values, header["nz"], header["nx"],
                          header["dz"], header["dx"], header["dtype"])
        print(out)
        return EXIT_OK

    grid = Grid(nz=args.nz, nx=args.nx, dz=args.dz, dx=args.dx)
    truth, gradient, homogeneous = make_inclusion_model(grid)
    out.mkdir(parents=True, exist_ok=True)
    wanted = {
        "inclusion": [("inclusion_true.bin", truth),
                      ("inclusion_gradient_start.bin", gradient),
                      ("inclusion_homogeneous_start.bin", homogeneous)],
        "gradient": [("inclusion_gradient_start.bin", gradient)],
        "homogeneous": [("inclusion_homogeneous_start.bin", homogeneous)],
    }[args.kind]
    for name, m in wanted:
        gridio.write_model_file(out / name, m)
        print(out / name)
    if args.kind == "inclusion" and args.survey:
        pml = PmlProfile(n_pml=args.n_pml)
        gridio.write_survey(out / "inclusion_survey.json",
                            experiments.inclusion_survey(grid, pml))
        print(out / "inclusion_survey.json")
    return EXIT_OK


def _cmd_forward(args) -> int:
    m = gridio.read_model_file(args.model)
    survey = gridio.read_survey(args.survey)
    pml = PmlProfile(n_pml=args.n_pml, sigma_max=args.sigma_max,
                     exponent=args.pml_exponent)
    v_max = float(slowness2_to_velocity(m).max())
    pml = PmlProfile(pml.n_pml, pml.resolve_sigma_max(m.grid, v_max), pml.exponent)
    data = forward_model(m, survey, pml, threads=args.threads)
    seed = None
    if args.snr is not None:
        seed = args.seed
        data = add_noise(data, args.snr, args.seed)
    gridio.write_dataset(args.out, data, survey, m.grid, pml, seed)
    print(Path(args.out) / "data_manifest.json")
    return EXIT_OK


def _cmd_invert(args) -> int:
    cfg = load_config(args.config)
    paths = run_from_config(cfg)
    for p in paths.values():
        print(p)
    return EXIT_OK


def _cmd_report(args) -> int:
    if not args.metrics:
        raise ValidationError("report needs at least one metrics CSV")
    labels = args.labels.split(",") if args.labels else None
    names, table = report.merge_metrics(args.metrics, labels)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.write_merged_csv(out, names, table)
    print(out)
    if not args.no_figures:
        if labels is None:
            labels = [n.rsplit("_data_residual", 1)[0]
                      for n in names if n.endswith("_data_residual")]
        for p in report.render_figures(args.metrics, labels, out.parent):
            print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wri2d",
        description="2D frequency-domain waveform inversion by wavefield "
        "reconstruction with bounds and TV regularization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_model = sub.add_parser("model", help="build or re-emit velocity grids")
    p_model.add_argument("kind", choices=["inclusion", "gradient", "homogeneous", "import"])
    p_model.add_argument("--nz", type=int, default=101)
    p_model.add_argument("--nx", type=int, default=151)
    p_model.add_argument("--dz", type=float, default=10.0)
    p_model.add_argument("--dx", type=float, default=10.0)
    p_model.add_argument("--from", dest="source", help="grid file to re-emit (import)")
    p_model.add_argument("--out", required=True, help="output directory (or file for import)")
    p_model.add_argument("--survey", action="store_true",
                         help="also emit the benchmark acquisition (inclusion only)")
    p_model.add_argument("--n-pml", type=int, default=10,
                         help="absorbing cells assumed when placing the survey")
    p_model.set_defaults(func=_cmd_model)

    p_fwd = sub.add_parser("forward", help="synthesize data for a model and survey")
    p_fwd.add_argument("--model", required=True)
    p_fwd.add_argument("--survey", required=True)
    p_fwd.add_argument("--out", required=True)
    p_fwd.add_argument("--snr", type=float, default=None,
                       help="per-gather signal-to-noise ratio in dB; omit for noiseless")
    p_fwd.add_argument("--seed", type=int, default=0)
    p_fwd.add_argument("--n-pml", type=int, default=10)
    p_fwd.add_argument("--sigma-max", type=float, default=None)
    p_fwd.add_argument("--pml-exponent", type=float, default=2.0)
    p_fwd.add_argument("--threads", type=int, default=1)
    p_fwd.set_defaults(func=_cmd_forward)

    p_inv = sub.add_parser("invert", help="run an inversion from a JSON config")
    p_inv.add_argument("--config", required=True,
                       help="config JSON (a run manifest is also accepted)")
    p_inv.set_defaults(func=_cmd_invert)

    p_rep = sub.add_parser("report", help="merge metrics CSVs and render figures")
    p_rep.add_argument("metrics", nargs="*", help="metrics CSV files")
    p_rep.add_argument("--labels", default=None, help="comma-separated run labels")
    p_rep.add_argument("--out", required=True, help="merged CSV path")
    p_rep.add_argument("--no-figures", action="store_true")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Standalone figure scripts over wri2d output files.

Subcommands: plot-model, plot-convergence, plot-all.
"""

from __future__ import annotations

import argparse
import sys

from .figures import plot_all, plot_convergence, plot_model
from .readers import FormatError, isotropic_tv_of_velocity, read_velocity_grid


def _cmd_model(args) -> int:
    out = plot_model(
        args.model,
        args.out,
        truth_path=args.truth,
        initial_path=args.initial,
        profile_x=args.profile_x,
        profile_z=args.profile_z,
    )
    print(out)
    return 0


def _cmd_convergence(args) -> int:
    truth_tv = None
    if args.truth:
        truth_tv = isotropic_tv_of_velocity(read_velocity_grid(args.truth)[1])
    out = plot_convergence(
        args.metrics,
        args.out,
        kind=args.kind,
        labels=args.labels.split(",") if args.labels else None,
        truth_tv=truth_tv,
    )
    print(out)
    return 0


def _cmd_all(args) -> int:
    for p in plot_all(args.run_dir, args.out_dir):
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wri2d-viz",
                                     description="figures from wri2d output files")
    sub = parser.add_subparsers(dest="command", required=True)

    p_model = sub.add_parser("plot-model", help="heatmap with profile insets")
    p_model.add_argument("--model", required=True)
    p_model.add_argument("--truth", default=None)
    p_model.add_argument("--initial", default=None)
    p_model.add_argument("--profile-x", type=float, default=None,
                         help="lateral position (m) of the vertical profile")
    p_model.add_argument("--profile-z", type=float, default=None,
                         help="depth (m) of the horizontal profile")
    p_model.add_argument("--out", required=True)
    p_model.set_defaults(func=_cmd_model)

    p_conv = sub.add_parser("plot-convergence", help="convergence-plane or TV figure")
    p_conv.add_argument("metrics", nargs="+")
    p_conv.add_argument("--kind", default="residual_plane",
                        choices=["residual_plane", "error_plane", "tv_history"])
    p_conv.add_argument("--labels", default=None)
    p_conv.add_argument("--truth", default=None,
                        help="true velocity grid for the TV reference line")
    p_conv.add_argument("--out", required=True)
    p_conv.set_defaults(func=_cmd_convergence)

    p_all = sub.add_parser("plot-all", help="every figure a run directory supports")
    p_all.add_argument("run_dir")
    p_all.add_argument("--out-dir", default=None)
    p_all.set_defaults(func=_cmd_all)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

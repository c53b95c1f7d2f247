"""Command-line entry point: ``vctrl {simulate,r0,optimize,compare,figure}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import RunConfig, build_config, parse_lines
from .errors import ConfigError, IntegrationDivergedError, ParameterError
from .ocp import CHANNELS
from .scenarios import EXIT_NOT_CONVERGED, EXIT_OK, FIGURES, FigureRuns, emit_figure_data, run

EXIT_FAILURE = 1
EXIT_USAGE = 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value configuration file")
    common.add_argument("--out", type=Path, help="output directory (default: out)")
    common.add_argument("--case", choices=("A", "B", "C"), help="weight case")
    common.add_argument("--tf", type=float, help="time horizon in days (default 84)")
    common.add_argument("--intervals", type=int, help="number of control intervals (default: one per day)")
    common.add_argument("--seed", type=int, help="seed for random multistart guesses")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="vctrl", description="Dengue vector-control model: simulation, R0 and optimal control.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="integrate the model under constant controls")
    p_r0 = sub.add_parser("r0", parents=[common], help="basic reproduction number at a point or over a sweep")
    p_r0.add_argument("--pair", help="sweep a control pair, e.g. c_m,c_A")
    p_opt = sub.add_parser("optimize", parents=[common], help="solve the optimal control problem")
    p_opt.add_argument("--single", choices=sorted(CHANNELS), help="optimize one control channel only")
    sub.add_parser("compare", parents=[common], help="optimal control versus no control")
    p_fig = sub.add_parser("figure", parents=[common], help="write the data behind figures")
    p_fig.add_argument("figures", nargs="+", choices=FIGURES + ("all",), metavar="FIGURE")
    return parser


def _config_from_args(args) -> RunConfig:
    entries: dict[str, str] = {}
    if args.config is not None:
        entries = {k: v for k, (_, v) in parse_lines(args.config.read_text()).items()}
    file_scenario = entries.get("scenario")
    if args.command == "r0":
        sweep = getattr(args, "pair", None) or file_scenario == "r0-sweep"
        entries["scenario"] = "r0-sweep" if sweep else "r0-point"
    elif args.command == "optimize":
        single = getattr(args, "single", None) or file_scenario == "optimize-single"
        entries["scenario"] = "optimize-single" if single else "optimize"
    elif args.command in ("simulate", "compare"):
        entries["scenario"] = args.command
    overrides = {
        "output_dir": args.out,
        "weights.case": args.case,
        "t_f": args.tf,
        "n_intervals": args.intervals,
        "seed": args.seed,
        "single": getattr(args, "single", None),
        "r0.pair": getattr(args, "pair", None),
    }
    for key, value in overrides.items():
        if value is not None:
            entries[key] = str(value)
    if args.case is not None:
        for k in [k for k in entries if k.startswith("weights.gamma")]:
            del entries[k]
    return build_config(entries)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from_args(args)
        if args.command == "figure":
            names = FIGURES if "all" in args.figures else tuple(dict.fromkeys(args.figures))
            runs = FigureRuns(cfg)
            for name in names:
                for path in emit_figure_data(name, cfg, runs):
                    print(path)
            return EXIT_OK if runs.all_converged else EXIT_NOT_CONVERGED
        status = run(cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"vctrl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, IntegrationDivergedError) as exc:
        print(f"vctrl: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if status == EXIT_NOT_CONVERGED:
        print("vctrl: warning: optimizer did not converge; results written anyway", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())

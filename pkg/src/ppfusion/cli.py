"""Command-line pipeline.

Subcommands: simulate, fit, evaluate, sweep, report. Global flags --config,
--seed, --out, --threads apply to every subcommand; --seed and --out
override the [run] section of the config.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 partial sweep failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ppfusion.config import load_config
from ppfusion.errors import ConfigError, NumericalError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL_SWEEP = 4


def _add_global_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", required=True, help="TOML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override run.seed")
    parser.add_argument("--out", default=None, help="override run.out_dir")
    parser.add_argument("--threads", type=int, default=1, help="worker processes (sweep)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppfusion",
        description="Simulate, fit, and evaluate fused point-pattern abundance models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="draw a synthetic dataset from the config")
    _add_global_flags(p_sim)

    p_fit = sub.add_parser("fit", help="fit a model to a dataset directory")
    _add_global_flags(p_fit)
    p_fit.add_argument("--data", default=None, help="dataset directory (default <out>/data)")
    group = p_fit.add_mutually_exclusive_group()
    group.add_argument("--fused", action="store_true", help="fit the fused model (default)")
    group.add_argument("--aerial-only", action="store_true", help="fit the aerial-only model")
    group.add_argument("--pam-only", action="store_true", help="fit the acoustic-only model")

    p_eval = sub.add_parser("evaluate", help="score fits against the simulated truth")
    _add_global_flags(p_eval)
    p_eval.add_argument("--truth", default=None, help="truth directory (default <out>/data)")
    p_eval.add_argument(
        "--fit", action="append", default=None, help="fit directory (repeatable; default all fit_*)"
    )

    p_sweep = sub.add_parser("sweep", help="run the scenario sweep")
    _add_global_flags(p_sweep)

    p_rep = sub.add_parser("report", help="render figures and summary tables")
    _add_global_flags(p_rep)
    p_rep.add_argument("--run", default=None, help="run directory (default <out>)")
    return parser


def _overrides(args) -> dict:
    run: dict = {}
    if args.seed is not None:
        run["seed"] = args.seed
    if args.out is not None:
        run["out_dir"] = args.out
    return {"run": run} if run else {}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, overrides=_overrides(args))
        if args.command == "simulate":
            from ppfusion.pipeline import cmd_simulate

            out = cmd_simulate(config)
            print(f"simulated dataset written to {out}")
        elif args.command == "fit":
            from ppfusion.pipeline import cmd_fit

            sources = "both"
            if args.aerial_only:
                sources = "aerial"
            elif args.pam_only:
                sources = "pam"
            out = cmd_fit(config, sources, data_dir=Path(args.data) if args.data else None)
            print(f"posterior samples written to {out}")
        elif args.command == "evaluate":
            from ppfusion.pipeline import cmd_evaluate

            fit_dirs = [Path(p) for p in args.fit] if args.fit else None
            out = cmd_evaluate(
                config,
                truth_dir=Path(args.truth) if args.truth else None,
                fit_dirs=fit_dirs,
            )
            print(f"evaluation written to {out}")
        elif args.command == "sweep":
            from ppfusion.pipeline import cmd_sweep

            out, failures = cmd_sweep(config, threads=args.threads)
            print(f"sweep written to {out} ({failures} failed rows)")
            if failures:
                return EXIT_PARTIAL_SWEEP
        elif args.command == "report":
            from ppfusion.report import cmd_report

            out = cmd_report(config, run_dir=Path(args.run) if args.run else None)
            print(f"report written to {out}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

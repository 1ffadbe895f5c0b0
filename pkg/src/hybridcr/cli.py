"""Command line interface: `run` executes a config-driven experiment,
`validate` runs the closed-form-versus-oracle check battery."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace


def _cmd_run(args: argparse.Namespace) -> int:
    from .experiments import load_config, run_experiment, write_results

    try:
        config = load_config(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: malformed config: {exc}", file=sys.stderr)
        return 2

    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.samples is not None:
        config = replace(config, mc=replace(config.mc, n_realizations=args.samples))
    if args.out is not None:
        config = replace(config, out=args.out)
    if args.plot:
        config = replace(config, plot=True)
    out_path = config.out or f"{config.experiment}.csv"

    rows = run_experiment(config)
    try:
        write_results(config, rows, out_path)
    except OSError as exc:
        print(f"error: cannot write results to {out_path}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(rows)} sweep rows to {out_path}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    from .validation import format_report, overall_pass, validate_suite

    checks = validate_suite(quick=args.quick)
    print(format_report(checks))
    return 0 if overall_pass(checks) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridcr",
        description="Joint sensing, beamforming and power design experiments "
                    "for hybrid SIMO cognitive radio uplinks.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a config-driven experiment sweep")
    run.add_argument("--config", required=True, help="experiment config file")
    run.add_argument("--seed", type=int, default=None, help="override master seed")
    run.add_argument("--samples", type=int, default=None,
                     help="override Monte Carlo realization count")
    run.add_argument("--out", default=None, help="override output CSV path")
    run.add_argument("--plot", action="store_true",
                     help="render the standard figure next to the CSV")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="run the closed-form vs oracle battery")
    val.add_argument("--quick", action="store_true", help="reduced sample counts")
    val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

# daf_numerics/primitives/cli.py

import argparse
import sys
from typing import List, Optional

from .. import config
from ..utils import ANSI, colorize
from ..utils.artifact_io import dumps_sorted
from ..utils.errors import DafNumericsError, UsageError
from .pipeline_runner import ExperimentConfig, list_systems, pipeline_runners, run


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; usage problems here map to 64."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="daf_numerics", description="Run a discretized-Anosov-flow numerics pipeline.")
    parser.add_argument("--system", help="Catalog name, perturbed:<name>, or a JSON recipe file.")
    parser.add_argument("--pipeline", help=f"One of: {', '.join(sorted(pipeline_runners()))}.")
    parser.add_argument("--config", help="Flat JSON/YAML experiment config; flags override its keys.")
    parser.add_argument("--out", help="Directory for the JSON summary and CSV tables.")
    parser.add_argument("--delta", type=float, help="Scale delta.")
    parser.add_argument("--grid", type=int, help="Sample grid resolution.")
    parser.add_argument("--budget", type=int, help="Iterate, horizon or return budget of the pipeline.")
    parser.add_argument("--seed", type=int, help=f"Seed for random samples (default: {config.DEFAULT_SEED}).")
    parser.add_argument("--json", action="store_true", help="Print the summary as JSON and silence console logging.")
    parser.add_argument("--list-systems", action="store_true", help="List the system catalog and exit.")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(colorize(f"[usage] {exc}", ANSI.RED), file=sys.stderr)
        return exc.exit_code

    if args.json:
        config.VERBOSE = False
    if args.list_systems:
        list_systems(as_json=args.json)
        return 0

    overrides = {
        "system": args.system,
        "pipeline": args.pipeline,
        "out": args.out,
        "delta": args.delta,
        "grid": args.grid,
        "budget": args.budget,
        "seed": args.seed,
    }
    try:
        cfg = ExperimentConfig.load(args.config, overrides)
    except DafNumericsError as exc:
        print(colorize(f"[error] {exc}", ANSI.RED), file=sys.stderr)
        return exc.exit_code

    code, summary = run(cfg.pipeline, cfg)
    if args.json:
        print(dumps_sorted(summary))
    elif code == 64:
        print(colorize(f"[usage] {summary['error']}", ANSI.RED), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

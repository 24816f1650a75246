"""Command-line entry point.

Subcommands: quantile-map, local-quantile-map, robustness, breakdown,
indep-power (all config-driven) and convert (dataset format conversion).
Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import COMMANDS, ExperimentConfig
from .dataio import convert_dataset
from .errors import ConfigError, DatasetError, NumericError
from .experiments import run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metricquantiles",
        description="Metric-space quantile, rank and independence-test experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=f"run the {name} experiment from a config file")
        cmd.add_argument("--config", required=True, help="path to the JSON config")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config seed (unsigned 64-bit)")
        cmd.add_argument("--out", default=None, help="override the output directory")
        cmd.add_argument("--threads", type=int, default=1,
                         help="worker threads; results do not depend on this")
        cmd.add_argument("--dump-matrices", action="store_true",
                         help="also write the distance and rank matrices as CSV")
    conv = sub.add_parser("convert", help="convert a dataset between CSV and JSON")
    conv.add_argument("input", help="source dataset (.csv or .json)")
    conv.add_argument("output", help="destination dataset (.csv or .json)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            written = convert_dataset(args.input, args.output)
            print(written)
            return 0
        cfg = ExperimentConfig.from_file(args.config, command=args.command,
                                         seed=args.seed, out=args.out,
                                         threads=args.threads,
                                         dump_matrices=args.dump_matrices)
        for path in run_experiment(cfg):
            print(path)
        return 0
    except (ConfigError, DatasetError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

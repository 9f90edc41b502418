"""Command-line entry point for running experiment sweeps.

Precedence for every setting: command-line flag > environment variable
(BRAHMSIM_<KEY>) > config file > built-in default. Exit codes: 0 success,
2 configuration error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, parse_config, preset
from .sweep import run_sweep

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

_EPILOG = """\
Any setting can also come from the environment with the BRAHMSIM_ prefix,
e.g. BRAHMSIM_ROUNDS=50 or BRAHMSIM_BYZANTINE_FRACTION=0.1,0.2 (commas for
list-valued settings). Precedence: flags > environment > config file.

Repeatable flags (--byzantine-fraction, --trusted-fraction, --eviction-rate,
--injection-fraction) replace the corresponding list wholesale.
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brahmsim",
        description="Run Byzantine-resilient peer sampling experiments.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", metavar="PATH", help="key=value config file")
    parser.add_argument(
        "--preset",
        choices=["paper-sweep", "desk"],
        help="start from a named parameter grid instead of the defaults",
    )
    parser.add_argument("--out", metavar="DIR", dest="out_dir", help="output directory")
    parser.add_argument("--workers", type=str, help="parallel worker processes")
    parser.add_argument("--force", action="store_true", default=None,
                        help="re-run entries whose output files already exist")

    parser.add_argument("--population-size", type=str, metavar="N")
    parser.add_argument("--byzantine-fraction", action="append", metavar="F")
    parser.add_argument("--trusted-fraction", action="append", metavar="T")
    parser.add_argument("--eviction-rate", action="append", metavar="R",
                        help="a rate in [0,1] or 'adaptive'; repeatable")
    parser.add_argument("--view-size", type=str, metavar="L")
    parser.add_argument("--sampler-count", type=str, metavar="L")
    parser.add_argument("--push-share", type=str, metavar="X")
    parser.add_argument("--pull-share", type=str, metavar="X")
    parser.add_argument("--history-share", type=str, metavar="X")
    parser.add_argument("--rounds", type=str, metavar="R")
    parser.add_argument("--repetitions", type=str, metavar="K")
    parser.add_argument("--seed", type=str, metavar="S")
    parser.add_argument("--push-budget-factor", type=str, metavar="X",
                        help="adversary pushes per Byzantine node, as a multiple of the honest push quota")
    parser.add_argument("--ident-threshold", type=str, metavar="X")
    parser.add_argument("--ident-attack", type=str, metavar="BOOL",
                        help="collect trusted-node identification observations (true/false)")
    parser.add_argument("--injection-fraction", action="append", metavar="I",
                        help="extra view-poisoned trusted nodes, as a fraction of n; repeatable")
    return parser


def _flag_overrides(args: argparse.Namespace) -> dict[str, list[str]]:
    mapping = {
        "population_size": args.population_size,
        "byzantine_fraction": args.byzantine_fraction,
        "trusted_fraction": args.trusted_fraction,
        "eviction_rate": args.eviction_rate,
        "view_size": args.view_size,
        "sampler_count": args.sampler_count,
        "push_share": args.push_share,
        "pull_share": args.pull_share,
        "history_share": args.history_share,
        "rounds": args.rounds,
        "repetitions": args.repetitions,
        "seed": args.seed,
        "push_budget_factor": args.push_budget_factor,
        "ident_threshold": args.ident_threshold,
        "ident_attack": args.ident_attack,
        "injection_fraction": args.injection_fraction,
        "out_dir": args.out_dir,
        "workers": args.workers,
    }
    overrides: dict[str, list[str]] = {}
    for key, value in mapping.items():
        if value is None:
            continue
        overrides[key] = value if isinstance(value, list) else [str(value)]
    if args.force:
        overrides["force"] = ["true"]
    return overrides


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        base = preset(args.preset) if args.preset else None
        config = parse_config(
            args.config,
            _flag_overrides(args),
            dict(os.environ),
            base=base,
        )
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return EXIT_RUNTIME if run_sweep(config) else EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

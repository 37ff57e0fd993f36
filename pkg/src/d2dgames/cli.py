"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 oracle-check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from d2dgames.config import ConfigError, ExperimentConfig, dump_config, load_config
from d2dgames.harness import oracle_check, run_experiment
from d2dgames.oracle import OracleBudget


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="d2dgames",
        description="Game-theoretic D2D underlay resource-allocation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the experiment described by a config file")
    run_p.add_argument("--config", required=True, help="path to a key = value config file")
    run_p.add_argument("--seed", type=int, default=None, help="override master_seed")
    run_p.add_argument("--out", default=None, help="override output directory")

    check_p = sub.add_parser("oracle-check", help="cross-validate engines against oracles")
    check_p.add_argument("--budget", type=int, default=2_000_000, help="max enumerated states")

    sub.add_parser("print-defaults", help="print the full default configuration")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "print-defaults":
        print(dump_config(ExperimentConfig()), end="")
        return 0

    if args.command == "oracle-check":
        checks = oracle_check(ExperimentConfig(), OracleBudget(max_assignments=args.budget))
        print(json.dumps(checks, indent=2, sort_keys=True))
        return 0 if checks["all_passed"] else 3

    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = replace(config, master_seed=args.seed)
        if args.out is not None:
            config = replace(config, output_path=args.out)
        config = config.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    summary = run_experiment(config)
    print(f"experiment: {summary.experiment}")
    print(f"rows: {len(summary.rows)}  wall clock: {summary.wall_clock_s:.2f} s")
    for key in sorted(summary.groups, key=str):
        st = summary.groups[key]
        print(f"  {key}: mean={st.mean:.4f} stddev={st.stddev:.4f} n={st.count}")
    if summary.errors:
        print(f"errors ({len(summary.errors)}):")
        for err in summary.errors:
            print(f"  {err}")
    if config.output_path:
        print(f"outputs written to {config.output_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point.

    mib run <experiment> --config cfg.json --out dir [--seed N] [--workers N] [--bits]
    mib list-estimators
    mib selfcheck

Exit codes: 0 success, 2 configuration error, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import autodiff, bounds, critics, harness, selfcheck, training


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mib", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment and write CSV artifacts")
    run_p.add_argument("experiment", choices=harness.EXPERIMENTS)
    run_p.add_argument("--config", type=Path, help="JSON experiment config")
    run_p.add_argument("--out", type=Path, required=True, help="output directory")
    run_p.add_argument("--seed", type=int, help="override the config seed")
    run_p.add_argument("--workers", type=int, help="parallel grid workers")
    run_p.add_argument("--bits", action="store_true",
                       help="print summary values in bits instead of nats")
    run_p.add_argument("--full-grid", action="store_true",
                       help="table3 only: widen the hyperparameter grid")

    sub.add_parser("list-estimators", help="print the available estimator names")
    sub.add_parser("selfcheck", help="run the built-in invariant suite")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "list-estimators":
        for name in bounds.ESTIMATOR_NAMES:
            print(name)
        return 0

    if args.command == "selfcheck":
        return 0 if selfcheck.run_selfcheck() else 1

    try:
        if args.config is not None:
            config = harness.load_config(args.config)
            if config.experiment != args.experiment:
                raise harness.ConfigError(
                    f"config is for {config.experiment!r}, not {args.experiment!r}")
        else:
            config = harness.default_config(args.experiment)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.workers is not None:
            overrides["workers"] = args.workers
        if overrides:
            config = dataclasses.replace(config, **overrides)
        entry = harness.run_experiment(config, args.out, bits=args.bits,
                                       full_grid=args.full_grid)
        print(f"wrote {len(entry.get('files', []))} file(s) to {args.out}")
        return 0
    except harness.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (training.NumericAbort, critics.NonFiniteScore, autodiff.NonFiniteError,
            autodiff.DomainError) as e:
        print(f"numeric abort: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

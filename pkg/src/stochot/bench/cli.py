"""``otbench``: run one benchmark experiment from a JSON config."""

from __future__ import annotations

import argparse
import sys

from ..continuous import NumericalOverflowError
from ..oracle import ConvergenceError
from .config import EXPERIMENTS, ConfigError, load_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="otbench", description=__doc__)
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON config file; defaults apply when omitted")
    p.add_argument("--seed", type=int, help="instance seed")
    p.add_argument("--out-dir", help="directory for traces, summary.csv and plots")
    p.add_argument("--eps", type=float, help="regularization strength")
    p.add_argument("--passes", type=int, help="passes for SAG and Sinkhorn")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, experiment=args.experiment, seed=args.seed,
                          out_dir=args.out_dir, eps=args.eps, passes=args.passes)
    except ConfigError as exc:
        print(f"otbench: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    from .experiments import run_experiment

    try:
        res = run_experiment(cfg)
    except (ConvergenceError, NumericalOverflowError, FloatingPointError) as exc:
        print(f"otbench: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"otbench: bad input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {len(res.traces)} traces and summary.csv to {res.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

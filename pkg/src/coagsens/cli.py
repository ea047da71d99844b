"""Command-line experiment runner."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config
from .experiment import run_experiment


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="coagsens",
        description="Run a coagulation sensitivity experiment from a config file.")
    parser.add_argument("--config", required=True, help="path to key = value config")
    parser.add_argument("--output", help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, help="base seed (overrides config)")
    parser.add_argument("--threads", type=int, help="worker count (overrides config)")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
        if args.output is not None:
            cfg.output_dir = args.output
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be non-negative")
            cfg.seed = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads must be positive")
            cfg.threads = args.threads
        info = run_experiment(cfg)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    for name, path in sorted(info["paths"].items()):
        print(f"wrote {path}")
    print(f"runs = {info['n_runs']}, mean wall clock = "
          f"{info['mean_wall_clock_s']:.3f}s")
    if info["d_var_vs_oracle"] is not None:
        print(f"d_var vs oracle = {info['d_var_vs_oracle']:.6g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

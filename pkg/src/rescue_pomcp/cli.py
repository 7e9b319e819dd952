"""Command-line entry points: run one experiment, sweep a grid, emit maps."""

from __future__ import annotations

import argparse
import json
import sys

from .grid import FAMILIES, make_environment
from .harness import expand_grid, load_config, run_experiment, sweep, write_results_csv


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rescue-pomcp")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment configuration")
    p_run.add_argument("--config", required=True, help="JSON experiment config")
    p_run.add_argument("--out", required=True, help="output CSV path")
    p_run.add_argument("--workers", type=int, default=1)

    p_sweep = sub.add_parser("sweep", help="run a grid of configurations")
    p_sweep.add_argument("--grid", required=True, help="JSON grid description")
    p_sweep.add_argument("--out", required=True, help="output CSV path")
    p_sweep.add_argument("--workers", type=int, default=1)

    p_map = sub.add_parser("gen-map", help="write an environment as an ASCII map file")
    p_map.add_argument("--family", required=True, choices=FAMILIES)
    p_map.add_argument("--seed", type=int, default=0)
    p_map.add_argument("--out", required=True)

    args = parser.parse_args(argv)

    if args.command == "run":
        config = load_config(args.config)
        result = run_experiment(config, workers=args.workers, csv_path=args.out)
        print(json.dumps(result.to_row(), indent=2, default=str))
        return 0

    if args.command == "sweep":
        with open(args.grid, "r", encoding="utf-8") as fh:
            configs = expand_grid(json.load(fh))
        results = sweep(configs, workers=args.workers, csv_path=args.out)
        print(f"wrote {len(results)}/{len(configs)} configuration rows to {args.out}")
        return 0 if len(results) == len(configs) else 1

    if args.command == "gen-map":
        grid = make_environment(args.family, args.seed)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(grid.to_ascii())
        print(f"wrote {args.family} map ({grid.width}x{grid.height}) to {args.out}")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())

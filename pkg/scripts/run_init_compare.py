#!/usr/bin/env python3
"""Initialization comparison on the 250-point, 50-d mixture surrogate:
runs the solver under all four init strategies with a fixed iteration
budget and records cost/delta traces against cumulative operation counts.
Emits init_compare.csv and a JSON report under the output directory."""

import sys

from lowrank_ot.cli import run_cli


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = ["init-compare", "--out", "results/init_compare",
            "--ranks", "10", "50", "--max-iters", "400", "--seed", "0"] + argv
    return run_cli(args)


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Approximation-gap study: low-rank value vs the exact LP value and the
ln(n/(r-1)) upper bound, across ranks on a seeded instance. Emits
approx_gap.csv and a JSON report under the output directory."""

import sys

from lowrank_ot.cli import run_cli


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = ["approx-gap", "--out", "results/approx_gap", "--n", "64",
            "--ranks", "2", "4", "8", "16", "32", "--seed", "0"] + argv
    return run_cli(args)


if __name__ == "__main__":
    sys.exit(main())

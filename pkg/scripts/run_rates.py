#!/usr/bin/env python3
"""Statistical-rate study: debiased divergence between two independent
empirical samples of a 10-component anisotropic Gaussian mixture, over a
(dimension, sample size, rank) grid. Emits rates.csv, slopes.csv and a JSON
report under the output directory."""

import sys

from lowrank_ot.cli import run_cli


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = ["rates", "--out", "results/rates", "--seed", "0"] + argv
    return run_cli(args)


if __name__ == "__main__":
    sys.exit(main())

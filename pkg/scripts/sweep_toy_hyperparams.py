#!/usr/bin/env python3
"""Hyper-parameter variation study on the toy profile.

Sweeps the boosting-loss weight, the referent count, and the number of
synthesized samples per class, one axis at a time, and leaves a TSV per axis
under the output directory.  Set INDZSL_THREADS to parallelize runs.
"""

import argparse
import os

from indzsl.cli import build_config, cmd_sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--outdir", default="runs/sweep")
    args = parser.parse_args()

    axes = {
        "lambda": dict(lambdas=[0.0, 0.01, 0.1, 0.5, 1.0]),
        "top_k": dict(top_ks=[1, 2, 4]),
        "n_syn": dict(n_syns=[50, 100, 200, 400, 800]),
    }
    for name, grid in axes.items():
        outdir = os.path.join(args.outdir, name)
        config = build_config({"profile": "toy", "seed": args.seed,
                               "outdir": outdir})
        print(f"== sweeping {name} ==")
        cmd_sweep(config, **grid)


if __name__ == "__main__":
    main()

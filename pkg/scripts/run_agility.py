#!/usr/bin/env python3
"""Run the agility experiment and write results/agility.csv."""
import argparse
import sys

from poise.harness.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, help="overrides the config seed (default 0 without a config)")
    ap.add_argument("--config")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    argv = ["exp", "agility", "--out", args.out]
    if args.config:
        argv += ["--config", args.config]
    if args.seed is not None or not args.config:
        argv += ["--seed", str(args.seed or 0)]
    sys.exit(main(argv))

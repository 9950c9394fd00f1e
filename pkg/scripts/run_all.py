#!/usr/bin/env python3
"""Every experiment plus the P1 example run, then a printed summary."""
import argparse
import sys
from pathlib import Path

from poise.harness.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    steps = [
        ["simulate", "--config", str(ROOT / "configs" / "p1_benign.toml"), "--out", args.out],
        ["exp", "scalability", "--config", str(ROOT / "configs" / "scalability.toml"), "--out", args.out],
        ["exp", "saturation", "--config", str(ROOT / "configs" / "saturation.toml"), "--out", args.out],
        ["exp", "agility", "--config", str(ROOT / "configs" / "agility.toml"), "--out", args.out],
    ]
    for argv in steps:
        rc = main(argv)
        if rc:
            sys.exit(rc)
    out = Path(args.out)
    sys.exit(main(["report"] + [str(out / f) for f in
                                ("scalability.csv", "saturation.csv", "agility.csv")]))

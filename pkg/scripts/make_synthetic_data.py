"""Regenerate the bundled planted dataset under data/synthetic."""

import argparse
from pathlib import Path

from ple.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=str(ROOT / "data" / "synthetic"))
    args = ap.parse_args()
    raise SystemExit(main(["make-synthetic", "--seed", str(args.seed), "--out-dir", args.out]))

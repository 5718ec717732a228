"""Compare the per-link (sgd) and full-gradient (batch) step rules over a range of learning rates."""

import argparse

import numpy as np

from ple.errors import DivergenceError
from ple.synthetic import recovery_run

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--variant", default="ple")
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.01, 0.03, 0.05, 0.1, 0.25])
    args = ap.parse_args()

    for step in ("sgd", "batch"):
        for a in args.alphas:
            accs = []
            try:
                for s in range(args.seeds):
                    accs.append(recovery_run(s, args.variant, step=step, alpha=a).strict)
                print(f"{step:<5} alpha={a:<5} strict={np.mean(accs):.3f}")
            except DivergenceError as exc:
                print(f"{step:<5} alpha={a:<5} diverged: {exc}")

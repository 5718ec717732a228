"""Per-iteration wall time as the corpus (and so |G_MF|) is duplicated.

The vocabulary is built once from the base corpus so that k copies give exactly k x |G_MF|.
"""

import argparse

import numpy as np

from ple.corpus import LabeledCorpus
from ple.features import build_vocabulary
from ple.graph import build_graph
from ple.synthetic import SyntheticConfig, generate
from ple.trainer import TrainingConfig, train


def replicate(corpus, k):
    return LabeledCorpus(corpus.mentions * k, corpus.candidates * k, corpus.hierarchy, corpus.gold * k)


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--factors", type=int, nargs="+", default=[1, 2, 4, 8])
    args = ap.parse_args()

    ds = generate(SyntheticConfig())
    vocab = build_vocabulary(ds.corpus, ds.feature_config)
    base = None
    for k in args.factors:
        corpus = replicate(ds.corpus, k)
        g = build_graph(corpus, vocab, "ple", ds.kb, ds.feature_config)
        train(g, TrainingConfig(d=20, max_iters=2))  # warm the compiled kernels
        log = train(g, TrainingConfig(d=20, max_iters=20, tol=1e-12)).log
        ms = float(np.median([r.wall_ms for r in log]))
        base = base or ms
        print(f"x{k:<3} |G_MF|={len(g.mf):>7}  E={g.E:>7}  median ms/iter {ms:8.2f}  ratio {ms / base:5.2f}")

"""How much O moves between negative draws alone, at a fixed trained model.

The relative spread here is a floor under any iteration-to-iteration change
of the logged objective, since each iteration draws fresh negatives.
"""

import argparse

import numpy as np

from ple.features import build_vocabulary
from ple.graph import build_graph
from ple.synthetic import SyntheticConfig, generate
from ple.trainer import NegativeSampler, TrainingConfig, objective, train

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--draws", type=int, default=30)
    ap.add_argument("--iters", type=int, nargs="+", default=[10, 50, 150])
    args = ap.parse_args()

    ds = generate(SyntheticConfig(seed=args.seed))
    vocab = build_vocabulary(ds.corpus, ds.feature_config)
    graph = build_graph(ds.corpus, vocab, "ple", ds.kb, ds.feature_config)
    for T in args.iters:
        cfg = TrainingConfig(d=20, seed=args.seed, max_iters=T, tol=1e-12)
        emb = train(graph, cfg).embeddings
        sampler = NegativeSampler(graph, cfg.Z, np.random.default_rng(123))
        O = np.array([objective(graph, emb, cfg, sampler.draw()).total for _ in range(args.draws)])
        rel = np.abs(np.diff(O)) / O[:-1]
        print(f"after {T:>4} iters: O mean {O.mean():10.2f}  rel std {O.std() / O.mean():.2e}  "
              f"median |consecutive change| {np.median(rel):.2e}  (tol 1e-4)")

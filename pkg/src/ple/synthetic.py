"""Planted partial-label corpora for end-to-end experiments.

A two-level hierarchy (``n_coarse`` coarse types, ``fine_per_coarse`` fine
types under each) is typed by distant supervision: each mention names its own
entity, whose KB types are the mention's true fine path plus one or two random
other fine paths. The candidate set is the ancestor closure of those paths.

Each fine type owns a lexicon of context words; before/after positions make
every word two features, so ``planted_per_type`` features come from
``planted_per_type // 2`` words (likewise for the shared noise words).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import ROOT, KBFacts, LabeledCorpus, Mention, TokenRecord, TypeHierarchy, write_corpus, write_hierarchy
from .features import FeatureConfig, build_vocabulary
from .graph import build_graph
from .inference import infer_all, random_candidate_paths
from .metrics import strict_accuracy
from .trainer import TrainingConfig, train


@dataclass(frozen=True)
class SyntheticConfig:
    n_coarse: int = 4
    fine_per_coarse: int = 3
    n_mentions: int = 500
    planted_per_type: int = 40
    noise_features: int = 200
    confusion_paths: tuple = (1, 2)
    planted_rate: float = 0.7
    window: int = 3
    seed: int = 0


def make_hierarchy(n_coarse: int = 4, fine_per_coarse: int = 3) -> TypeHierarchy:
    names, parents = [], []
    for c in range(n_coarse):
        names.append(f"coarse{c}")
        parents.append(ROOT)
    for c in range(n_coarse):
        for f in range(fine_per_coarse):
            names.append(f"fine{c}_{f}")
            parents.append(c)
    return TypeHierarchy(tuple(names), tuple(parents))


@dataclass(frozen=True)
class SyntheticDataset:
    corpus: LabeledCorpus
    kb: KBFacts
    true_fine: tuple
    config: SyntheticConfig

    @property
    def feature_config(self) -> FeatureConfig:
        # only context words are planted, so other families would be pure noise
        return FeatureConfig(context_window=self.config.window, enabled_families=("context",))

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"corpus": out / "corpus.jsonl", "hierarchy": out / "hierarchy.tsv",
                 "kb_facts": out / "kb_facts.tsv"}
        write_corpus(self.corpus, paths["corpus"])
        write_hierarchy(self.corpus.hierarchy, paths["hierarchy"])
        with open(paths["kb_facts"], "w", encoding="utf-8") as fh:
            for entity, t in sorted(self.kb.facts):
                fh.write(f"{entity}\t{t}\n")
        return paths


def generate(config: SyntheticConfig = SyntheticConfig()) -> SyntheticDataset:
    rng = np.random.default_rng(config.seed)
    h = make_hierarchy(config.n_coarse, config.fine_per_coarse)
    fine = [k for k in range(h.K) if h.parent(k) != ROOT]
    words_per_type = config.planted_per_type // 2
    lexicon = {k: [f"w{k}x{n}" for n in range(words_per_type)] for k in fine}
    noise = [f"nz{n}" for n in range(config.noise_features // 2)]

    lo, hi = config.confusion_paths
    mentions, cands, golds, true_fine, facts = [], [], [], [], set()
    for i in range(config.n_mentions):
        truth = int(rng.choice(fine))
        others = [k for k in fine if k != truth]
        n_conf = int(rng.integers(lo, hi + 1))
        labels = [truth] + rng.choice(others, size=n_conf, replace=False).tolist()
        slots = []
        for _ in range(2 * config.window):
            pool = lexicon[truth] if rng.random() < config.planted_rate else noise
            slots.append(pool[int(rng.integers(len(pool)))])
        words = slots[:config.window] + [f"Entity{i}"] + slots[config.window:]
        pos = ["NN"] * config.window + ["NNP"] + ["NN"] * config.window
        context = tuple(TokenRecord(w, p) for w, p in zip(words, pos))
        mentions.append(Mention(id=i, tokens=context[config.window:config.window + 1], head_index=0,
                                context=context, start=config.window, sentence_id=f"s{i}",
                                entity_id=f"e{i}", doc_id=f"doc{i // 10}"))
        closed = h.close(labels)
        cands.append(closed)
        golds.append(frozenset(h.path(truth)))
        true_fine.append(truth)
        facts.update((f"e{i}", h.names[k]) for k in closed)

    kb = KBFacts(frozenset(facts), {n: n for n in h.names})
    corpus = LabeledCorpus(tuple(mentions), tuple(cands), h, tuple(golds))
    return SyntheticDataset(corpus, kb, tuple(true_fine), config)


@dataclass(frozen=True)
class RecoveryRun:
    seed: int
    variant: str
    strict: float
    assume_all: float
    random_path: float
    converged: bool
    iterations: int
    decrease_fraction: float
    seconds: float
    log: tuple


def recovery_run(seed: int, variant: str = "ple", d: int = 20, data: SyntheticConfig | None = None,
                 **train_overrides) -> RecoveryRun:
    """Generate, train at defaults (except ``d``), infer; score against the planted paths."""
    t0 = time.perf_counter()
    ds = generate(data if data is not None else SyntheticConfig(seed=seed))
    corpus = ds.corpus
    vocab = build_vocabulary(corpus, ds.feature_config)
    graph = build_graph(corpus, vocab, variant, ds.kb, ds.feature_config)
    result = train(graph, TrainingConfig(d=d, variant=variant, seed=seed, **train_overrides))
    paths = infer_all(result.embeddings, corpus)
    rand = random_candidate_paths(corpus, np.random.default_rng(seed))
    O = np.array([r.O for r in result.log])
    return RecoveryRun(
        seed=seed, variant=variant,
        strict=strict_accuracy(paths, corpus.gold),
        assume_all=strict_accuracy(corpus.candidates, corpus.gold),
        random_path=strict_accuracy(rand, corpus.gold),
        converged=result.converged, iterations=len(result.log),
        decrease_fraction=float(np.mean(np.diff(O) < 0)) if len(O) > 1 else 1.0,
        seconds=time.perf_counter() - t0, log=tuple(result.log))

"""Top-down type-path inference, corpus denoising and iterative re-training."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .corpus import ROOT, LabeledCorpus, TypeHierarchy
from .errors import ConfigError, SchemaError
from .features import FeatureVocabulary
from .graph import HeteroGraph
from .trainer import EmbeddingStore, TrainingConfig, TrainResult, train

logger = logging.getLogger(__name__)

POOLINGS = ("mean", "sum")


@dataclass(frozen=True)
class InferenceConfig:
    eta: float = 0.1
    unseen_pooling: str = "mean"

    def __post_init__(self):
        if not np.isfinite(self.eta):
            raise ConfigError("eta must be a finite real number")
        if self.unseen_pooling not in POOLINGS:
            raise ConfigError(f"unseen_pooling must be one of {POOLINGS}")


def infer_path_from_scores(scores, candidates, hierarchy: TypeHierarchy, eta: float = 0.1) -> tuple[int, ...]:
    """Greedy root-to-leaf walk over candidate children; ``scores[k]`` scores type k."""
    path = []
    node = ROOT
    while True:
        children = [k for k in hierarchy.children(node) if k in candidates]
        if not children:
            break
        # children are in id order and max keeps the first maximum
        best = max(children, key=lambda k: scores[k])
        if not scores[best] > eta:
            break
        path.append(best)
        node = best
    return tuple(path)


def infer_type_path(mention_id: int, embeddings: EmbeddingStore, candidates, hierarchy: TypeHierarchy,
                    config: InferenceConfig = InferenceConfig()) -> tuple[int, ...]:
    scores = embeddings.V @ embeddings.U[mention_id]
    return infer_path_from_scores(scores, candidates, hierarchy, config.eta)


def infer_all(embeddings: EmbeddingStore, corpus: LabeledCorpus, config: InferenceConfig = InferenceConfig(),
              candidates=None) -> list[tuple[int, ...]]:
    """Inferred path per mention; ``candidates`` overrides the corpus candidate sets."""
    if len(embeddings.U) != corpus.N:
        raise SchemaError(f"model has {len(embeddings.U)} mention vectors but corpus has {corpus.N} mentions")
    if len(embeddings.V) != corpus.hierarchy.K:
        raise SchemaError(f"model has {len(embeddings.V)} types but hierarchy has {corpus.hierarchy.K}")
    cands = corpus.candidates if candidates is None else candidates
    S = embeddings.U @ embeddings.V.T
    return [infer_path_from_scores(S[i], cands[i], corpus.hierarchy, config.eta) for i in range(corpus.N)]


def embed_unseen_mention(features, vocab: FeatureVocabulary, embeddings: EmbeddingStore,
                         pooling: str = "mean") -> np.ndarray:
    ids = vocab.ids(features)
    if not ids:
        raise ValueError("untypeable mention: none of its features is in the vocabulary")
    rows = embeddings.C[ids]
    if pooling == "mean":
        return rows.mean(axis=0)
    if pooling == "sum":
        return rows.sum(axis=0)
    raise ConfigError(f"unknown pooling {pooling!r}")


@dataclass(frozen=True)
class DenoiseResult:
    corpus: LabeledCorpus
    kept: tuple[int, ...]
    dropped: tuple[int, ...]
    paths: tuple[tuple[int, ...], ...]

    @property
    def drop_rate(self) -> float:
        total = len(self.kept) + len(self.dropped)
        return len(self.dropped) / total if total else 0.0


def denoise_from_paths(corpus: LabeledCorpus, paths) -> DenoiseResult:
    kept = tuple(i for i, p in enumerate(paths) if p)
    dropped = tuple(i for i, p in enumerate(paths) if not p)
    out = corpus.with_candidates([frozenset(p) for p in paths]).subset(kept)
    if dropped:
        logger.info("dropped %d of %d mentions with empty inferred paths", len(dropped), corpus.N)
    return DenoiseResult(out, kept, dropped, tuple(paths))


def denoise_corpus(corpus: LabeledCorpus, embeddings: EmbeddingStore,
                   config: InferenceConfig = InferenceConfig()) -> DenoiseResult:
    """Replace each candidate set by its inferred path; mentions with empty paths are dropped."""
    return denoise_from_paths(corpus, infer_all(embeddings, corpus, config))


def random_candidate_paths(corpus: LabeledCorpus, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """Baseline: a uniformly random leaf of each candidate subtree, with its ancestors."""
    h = corpus.hierarchy
    out = []
    for cands in corpus.candidates:
        leaves = sorted(k for k in cands if not any(c in cands for c in h.children(k)))
        out.append(tuple(h.path(leaves[int(rng.integers(len(leaves)))])) if leaves else ())
    return out


def labels_to_mask(labels, N: int, K: int) -> np.ndarray:
    mask = np.zeros((N, K), dtype=bool)
    for i, ys in enumerate(labels):
        mask[i, sorted(ys)] = True
    return mask


def retrain_loop(graph: HeteroGraph, corpus: LabeledCorpus, train_config: TrainingConfig,
                 config: InferenceConfig = InferenceConfig(), iters: int = 1,
                 on_round=None) -> list[tuple[TrainResult, list]]:
    """Train, infer, then re-train on the inferred labels, ``iters`` times in total.

    Later rounds replace G_MY by the previous round's paths (mentions with an
    empty path keep their original candidates). Inference always searches the
    original candidate sets.
    """
    if iters < 1:
        raise ConfigError("iters must be >= 1")
    labels = list(corpus.candidates)
    rounds = []
    for r in range(iters):
        mask = labels_to_mask(labels, corpus.N, corpus.hierarchy.K)
        result = train(graph, train_config, mask=mask)
        paths = infer_all(result.embeddings, corpus, config)
        rounds.append((result, paths))
        if on_round is not None:
            on_round(r, result, paths)
        labels = [frozenset(p) if p else corpus.candidates[i] for i, p in enumerate(paths)]
    return rounds

"""Heterogeneous mention/feature/type graph and degree-based negative samplers."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .corpus import ROOT, KBFacts, LabeledCorpus, TypeHierarchy
from .errors import ConfigError, InputFileError, SchemaError
from .features import FeatureConfig, FeatureVocabulary, extract_features

logger = logging.getLogger(__name__)

VARIANTS = ("ple", "ple-coh", "ple-noco")
NOISE_EXPONENT = 0.75


def normalize_variant(variant: str) -> str:
    v = variant.lower().replace("_", "-")
    if v not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return v


@dataclass(frozen=True, eq=False)
class HeteroGraph:
    """Link sets G_MY, G_MF, G_YY over N mentions, M features and K types.

    ``yy`` holds each unordered type pair once with ``yy[:, 0] < yy[:, 1]``.
    """

    N: int
    M: int
    K: int
    my: np.ndarray
    mf: np.ndarray
    yy: np.ndarray
    yy_weight: np.ndarray
    variant: str = "ple"

    def __post_init__(self):
        for name in ("my", "mf", "yy"):
            arr = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1, 2)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "yy_weight", np.asarray(self.yy_weight, dtype=np.float64).reshape(-1))
        if len(self.yy) != len(self.yy_weight):
            raise SchemaError("one weight per type-type link required")
        if len(self.yy) and np.any(self.yy[:, 0] >= self.yy[:, 1]):
            raise SchemaError("type-type links must be stored once with src < dst (no self-loops)")
        if self.variant == "ple-noco" and len(self.yy):
            raise SchemaError("ple-noco graphs carry no type-type links")

    @property
    def mf_weight(self) -> np.ndarray:
        return np.ones(len(self.mf))

    @property
    def E(self) -> int:
        return len(self.my) + len(self.mf) + len(self.yy)

    def candidate_mask(self) -> np.ndarray:
        mask = np.zeros((self.N, self.K), dtype=bool)
        mask[self.my[:, 0], self.my[:, 1]] = True
        return mask

    def feature_degrees(self) -> np.ndarray:
        return np.bincount(self.mf[:, 1], minlength=self.M).astype(np.float64)

    def type_degrees(self) -> np.ndarray:
        deg = np.zeros(self.K)
        np.add.at(deg, self.yy[:, 0], self.yy_weight)
        np.add.at(deg, self.yy[:, 1], self.yy_weight)
        return deg


def build_mention_type_graph(corpus: LabeledCorpus) -> np.ndarray:
    rows = [(i, k) for i, cands in enumerate(corpus.candidates) for k in sorted(cands)]
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def mention_feature_ids(corpus: LabeledCorpus, vocab: FeatureVocabulary,
                        config: FeatureConfig = FeatureConfig()) -> list[list[int]]:
    return [vocab.ids(extract_features(m, config)) for m in corpus.mentions]


def build_mention_feature_graph(corpus: LabeledCorpus, vocab: FeatureVocabulary,
                                config: FeatureConfig = FeatureConfig()) -> np.ndarray:
    rows = []
    bare = 0
    for i, ids in enumerate(mention_feature_ids(corpus, vocab, config)):
        if not ids:
            bare += 1
        rows.extend((i, j) for j in sorted(ids))
    if bare:
        logger.warning("%d mentions have no in-vocabulary features; trained through G_MY only", bare)
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def build_hierarchy_correlation(hierarchy: TypeHierarchy) -> list[tuple[int, int, float]]:
    """Weight 1/(1 + shortest path) for type pairs joined without passing the root."""
    links = []
    for a, b in combinations(range(hierarchy.K), 2):
        rho, lca = hierarchy.distance(a, b)
        if lca != ROOT:
            links.append((a, b, 1.0 / (1.0 + rho)))
    return links


def build_kb_correlation(kb: KBFacts, hierarchy: TypeHierarchy) -> list[tuple[int, int, float]]:
    """Mean of the two shared-entity fractions, for pairs sharing at least one entity."""
    sets = kb.entity_sets(hierarchy)
    missing = [hierarchy.names[k] for k in range(hierarchy.K) if k not in sets]
    if missing:
        logger.warning("types without KB entities (isolated in G_YY): %s", ", ".join(missing))
    links = []
    for a, b in combinations(sorted(sets), 2):
        shared = len(sets[a] & sets[b])
        if shared:
            links.append((a, b, (shared / len(sets[a]) + shared / len(sets[b])) / 2.0))
    return links


def build_graph(corpus: LabeledCorpus, vocab: FeatureVocabulary, variant: str = "ple",
                kb: KBFacts | None = None, feature_config: FeatureConfig = FeatureConfig()) -> HeteroGraph:
    variant = normalize_variant(variant)
    if variant == "ple":
        if kb is None:
            raise ConfigError("variant 'ple' needs KB facts for type correlation")
        yy = build_kb_correlation(kb, corpus.hierarchy)
    elif variant == "ple-coh":
        yy = build_hierarchy_correlation(corpus.hierarchy)
    else:
        yy = []
    return HeteroGraph(
        N=corpus.N,
        M=vocab.M,
        K=corpus.hierarchy.K,
        my=build_mention_type_graph(corpus),
        mf=build_mention_feature_graph(corpus, vocab, feature_config),
        yy=np.array([(a, b) for a, b, _ in yy], dtype=np.int64).reshape(-1, 2),
        yy_weight=np.array([w for _, _, w in yy], dtype=np.float64),
        variant=variant,
    )


class AliasSampler:
    """Constant-time draws from P(x) proportional to degree(x) ** exponent (Vose's method)."""

    def __init__(self, degrees, exponent: float = NOISE_EXPONENT):
        if isinstance(degrees, dict):
            nodes = np.array(sorted(degrees), dtype=np.int64)
            weights = np.array([degrees[n] for n in nodes], dtype=np.float64)
        else:
            weights = np.asarray(degrees, dtype=np.float64)
            nodes = np.arange(len(weights), dtype=np.int64)
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("degrees must be finite and non-negative")
        keep = weights > 0
        if not keep.any():
            raise ValueError("alias sampler needs at least one node with positive degree")
        self.nodes = nodes[keep]
        self.exponent = exponent
        p = weights[keep] ** exponent
        self.probabilities = p / p.sum()
        self.prob, self.alias = self._build(self.probabilities)

    @staticmethod
    def _build(p):
        n = len(p)
        scaled = p * n
        prob = np.ones(n)
        alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            (small if scaled[l] < 1.0 else large).append(l)
        # leftovers are 1 up to rounding
        for i in small + large:
            prob[i] = 1.0
        return prob, alias

    def __len__(self):
        return len(self.nodes)

    def distribution(self, size: int | None = None) -> np.ndarray:
        """Exact target probabilities indexed by node id."""
        size = int(self.nodes.max()) + 1 if size is None else size
        out = np.zeros(size)
        out[self.nodes] = self.probabilities
        return out

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        col = rng.integers(0, len(self.prob), size=size)
        take = rng.random(size=size) < self.prob[col]
        return self.nodes[np.where(take, col, self.alias[col])]

    def draw_excluding(self, rng: np.random.Generator, exclude: np.ndarray, Z: int) -> np.ndarray:
        """``Z`` draws per entry of ``exclude``; draws equal to that entry are redrawn."""
        exclude = np.asarray(exclude, dtype=np.int64).reshape(-1)
        out = self.draw(rng, (len(exclude), Z))
        if Z == 0 or len(exclude) == 0:
            return out
        if len(self.nodes) == 1 and np.any(exclude == self.nodes[0]):
            raise ValueError("cannot draw a negative: the only node with positive degree is excluded")
        bad = out == exclude[:, None]
        while bad.any():
            out[bad] = self.draw(rng, int(bad.sum()))
            bad = out == exclude[:, None]
        return out


def build_alias_sampler(degrees, exponent: float = NOISE_EXPONENT) -> AliasSampler:
    return AliasSampler(degrees, exponent)


def sample_negatives(sampler: AliasSampler, Z: int, exclude: int, rng: np.random.Generator) -> np.ndarray:
    return sampler.draw_excluding(rng, np.array([exclude]), Z)[0]


GRAPH_FILES = ("g_my.tsv", "g_mf.tsv", "g_yy.tsv")


def _write_edges(path, pairs, weights):
    with open(path, "w", encoding="utf-8") as fh:
        for (a, b), w in zip(pairs.tolist(), weights.tolist()):
            fh.write(f"{a}\t{b}\t{w:.12g}\n")


def write_graph(graph: HeteroGraph, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_edges(out_dir / "g_my.tsv", graph.my, np.ones(len(graph.my)))
    _write_edges(out_dir / "g_mf.tsv", graph.mf, graph.mf_weight)
    _write_edges(out_dir / "g_yy.tsv", graph.yy, graph.yy_weight)
    meta = {"N": graph.N, "M": graph.M, "K": graph.K, "variant": graph.variant,
            "links": {"my": len(graph.my), "mf": len(graph.mf), "yy": len(graph.yy)}}
    (out_dir / "graph.json").write_text(json.dumps(meta, indent=2) + "\n")


def _read_edges(path):
    if not path.is_file():
        raise InputFileError(f"no such file: {path}")
    if path.stat().st_size == 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0)
    data = np.loadtxt(path, delimiter="\t", ndmin=2, dtype=np.float64)
    if data.shape[1] != 3:
        raise SchemaError(f"{path}: expected src<TAB>dst<TAB>weight")
    return data[:, :2].astype(np.int64), data[:, 2]


def load_graph(graph_dir) -> HeteroGraph:
    graph_dir = Path(graph_dir)
    meta_path = graph_dir / "graph.json"
    if not meta_path.is_file():
        raise InputFileError(f"no such file: {meta_path}")
    meta = json.loads(meta_path.read_text())
    my, _ = _read_edges(graph_dir / "g_my.tsv")
    mf, _ = _read_edges(graph_dir / "g_mf.tsv")
    yy, w = _read_edges(graph_dir / "g_yy.tsv")
    return HeteroGraph(meta["N"], meta["M"], meta["K"], my, mf, yy, w, meta["variant"])

"""Heuristic label-pruning baselines (Sib, Min, All) and candidate-noise statistics."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass

from .corpus import LabeledCorpus, TypeHierarchy
from .errors import SchemaError


@dataclass(frozen=True)
class PruneResult:
    corpus: LabeledCorpus
    kept: tuple[int, ...]
    discarded: tuple[int, ...]

    @property
    def deleted_fraction(self) -> float:
        total = len(self.kept) + len(self.discarded)
        return len(self.discarded) / total if total else 0.0


def _finish(corpus: LabeledCorpus, new_sets) -> PruneResult:
    kept = tuple(i for i, s in enumerate(new_sets) if s)
    discarded = tuple(i for i, s in enumerate(new_sets) if not s)
    return PruneResult(corpus.with_candidates(new_sets).subset(kept), kept, discarded)


def sibling_groups(cands, hierarchy: TypeHierarchy) -> list[tuple[int, ...]]:
    """Groups of >= 2 candidates sharing a parent (the root counts as a parent)."""
    by_parent = defaultdict(list)
    for k in sorted(cands):
        by_parent[hierarchy.parent(k)].append(k)
    return [tuple(v) for _, v in sorted(by_parent.items()) if len(v) >= 2]


def has_siblings(cands, hierarchy: TypeHierarchy) -> bool:
    return bool(sibling_groups(cands, hierarchy))


def sib_prune_set(cands, hierarchy: TypeHierarchy, keep_one: bool = False, scores=None) -> frozenset:
    """Drop every candidate that has a candidate sibling, with its descendants.

    With ``keep_one`` the best-scored sibling of each group survives instead
    (``scores[k]``; the smallest id when no scores are given).
    """
    out = set(cands)
    for group in sibling_groups(cands, hierarchy):
        survivor = None
        if keep_one:
            survivor = max(group, key=lambda k: scores[k]) if scores is not None else group[0]
        for k in group:
            if k != survivor:
                out.discard(k)
                out -= hierarchy.descendants(k)
    return frozenset(out)


def sib_prune(corpus: LabeledCorpus, keep_one: bool = False) -> PruneResult:
    h = corpus.hierarchy
    return _finish(corpus, [sib_prune_set(c, h, keep_one) for c in corpus.candidates])


def min_prune(corpus: LabeledCorpus) -> PruneResult:
    """Remove types carried by only one mention of their document."""
    missing = [m.id for m in corpus.mentions if m.doc_id is None]
    if missing:
        raise SchemaError(f"min pruning needs document ids; {len(missing)} mentions lack one "
                          f"(first: mention {missing[0]})")
    counts = defaultdict(Counter)
    for m, cands in zip(corpus.mentions, corpus.candidates):
        counts[m.doc_id].update(cands)
    new_sets = [frozenset(k for k in cands if counts[m.doc_id][k] >= 2)
                for m, cands in zip(corpus.mentions, corpus.candidates)]
    return _finish(corpus, new_sets)


def all_prune(corpus: LabeledCorpus) -> PruneResult:
    first = sib_prune(corpus)
    second = min_prune(first.corpus)
    kept = tuple(first.kept[j] for j in second.kept)
    discarded = tuple(sorted(set(range(corpus.N)) - set(kept)))
    return PruneResult(second.corpus, kept, discarded)


PRUNERS = {"sib": sib_prune, "min": min_prune, "all": all_prune}


@dataclass(frozen=True)
class NoiseStats:
    mentions: int
    sibling_fraction: float
    deleted: dict

    def as_dict(self) -> dict:
        return {"mentions": self.mentions, "sibling_fraction": self.sibling_fraction,
                "deleted_fraction": dict(self.deleted)}

    def table(self) -> str:
        rows = [("mentions", str(self.mentions)),
                ("% with sibling types", f"{100 * self.sibling_fraction:.2f}")]
        rows += [(f"% deleted by {name}", f"{100 * v:.2f}") for name, v in self.deleted.items()]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{a:<{width}}  {b:>8}" for a, b in rows)


def noise_stats(corpus: LabeledCorpus) -> NoiseStats:
    h = corpus.hierarchy
    n = corpus.N
    noisy = sum(has_siblings(c, h) for c in corpus.candidates)
    deleted = {"Sib": sib_prune(corpus).deleted_fraction}
    has_docs = all(m.doc_id is not None for m in corpus.mentions)
    if has_docs:
        deleted["Min"] = min_prune(corpus).deleted_fraction
        deleted["All"] = all_prune(corpus).deleted_fraction
    return NoiseStats(n, noisy / n if n else 0.0, deleted)


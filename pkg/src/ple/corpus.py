"""Corpus, type hierarchy and KB fact ingestion.

Record layout of the line-delimited corpus (one JSON object per line)::

    {"id": 7, "doc": "d1", "sentence_id": "d1-3", "entity": "m.0abc",
     "sentence": ["He", "met", "Trump", "."], "start": 2, "tokens": ["Trump"],
     "head": 0, "pos": ["PRP", "VBD", "NNP", "."],
     "dep": [["nsubj", 1], null, ["dobj", 1], null],
     "brown": ["0010", "1101", "111011", null],
     "candidates": ["person", "politician"], "gold": ["person", "politician"]}

Only ``tokens`` and ``candidates`` are required. ``pos``/``dep``/``brown`` are
aligned with ``sentence`` (or with ``tokens`` when no sentence is given); a dep
entry is ``[label, governor_index]`` with governor ``-1`` for the sentence root.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InputFileError, SchemaError

logger = logging.getLogger(__name__)

ROOT = -1


@dataclass(frozen=True)
class TokenRecord:
    text: str
    pos: str | None = None
    dep_label: str | None = None
    dep_governor: int | None = None
    brown_path: str | None = None

    def __post_init__(self):
        if not self.text:
            raise SchemaError("token text must be non-empty")
        if self.brown_path is not None and set(self.brown_path) - {"0", "1"}:
            raise SchemaError(f"brown path {self.brown_path!r} is not a bit string")


@dataclass(frozen=True)
class Mention:
    id: int
    tokens: tuple[TokenRecord, ...]
    head_index: int
    context: tuple[TokenRecord, ...]
    start: int
    sentence_id: str = ""
    entity_id: str | None = None
    doc_id: str | None = None

    def __post_init__(self):
        if not self.tokens:
            raise SchemaError(f"mention {self.id}: empty token span")
        if not 0 <= self.head_index < len(self.tokens):
            raise SchemaError(f"mention {self.id}: head index {self.head_index} outside span")
        end = self.start + len(self.tokens)
        if self.start < 0 or end > len(self.context) or self.context[self.start:end] != self.tokens:
            raise SchemaError(f"mention {self.id}: token span not found in its sentence")

    @property
    def end(self) -> int:
        return self.start + len(self.tokens)

    @property
    def head(self) -> TokenRecord:
        return self.tokens[self.head_index]


@dataclass(frozen=True)
class TypeHierarchy:
    """Rooted tree over K named types; ids are 0..K-1, the synthetic root is ``ROOT``."""

    names: tuple[str, ...]
    parents: tuple[int, ...]
    _index: dict = field(init=False, repr=False, compare=False)
    _children: dict = field(init=False, repr=False, compare=False)
    _depth: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.names) != len(self.parents):
            raise SchemaError("names and parents differ in length")
        index = {}
        for k, name in enumerate(self.names):
            if name in index:
                raise SchemaError(f"duplicate type {name!r}")
            index[name] = k
        children = defaultdict(list)
        for k, p in enumerate(self.parents):
            if p != ROOT and not 0 <= p < len(self.names):
                raise SchemaError(f"type {self.names[k]!r} has invalid parent id {p}")
            children[p].append(k)
        depth = [0] * len(self.names)
        for k in range(len(self.names)):
            seen, node, d = set(), k, 0
            while node != ROOT:
                if node in seen:
                    raise SchemaError(f"cycle through type {self.names[k]!r}")
                seen.add(node)
                node = self.parents[node]
                d += 1
            depth[k] = d
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_children", {p: tuple(c) for p, c in children.items()})
        object.__setattr__(self, "_depth", tuple(depth))

    @property
    def K(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"unknown type {name!r}") from None

    def __contains__(self, name) -> bool:
        return name in self._index

    def parent(self, k: int) -> int:
        return self.parents[k]

    def children(self, k: int = ROOT) -> tuple[int, ...]:
        return self._children.get(k, ())

    def depth(self, k: int) -> int:
        return 0 if k == ROOT else self._depth[k]

    def ancestors(self, k: int) -> list[int]:
        """Strict ancestors of ``k``, nearest first, root excluded."""
        out = []
        p = self.parents[k]
        while p != ROOT:
            out.append(p)
            p = self.parents[p]
        return out

    def path(self, k: int) -> list[int]:
        """Root-to-node path ending at ``k`` (root excluded)."""
        return list(reversed(self.ancestors(k))) + [k]

    def descendants(self, k: int) -> set[int]:
        out, stack = set(), list(self.children(k))
        while stack:
            c = stack.pop()
            out.add(c)
            stack.extend(self.children(c))
        return out

    def close(self, types: Iterable[int]) -> frozenset[int]:
        out = set()
        for k in types:
            out.add(k)
            out.update(self.ancestors(k))
        return frozenset(out)

    def is_path(self, types: Iterable[int]) -> bool:
        """True for a root-to-node chain (the empty set counts)."""
        s = set(types)
        if not s:
            return True
        deepest = max(s, key=self.depth)
        return s == set(self.path(deepest))

    def distance(self, a: int, b: int) -> tuple[int, int]:
        """Shortest-path length between ``a`` and ``b`` and their lowest common ancestor."""
        pa = [a] + self.ancestors(a) + [ROOT]
        pb = [b] + self.ancestors(b) + [ROOT]
        pos_a = {n: i for i, n in enumerate(pa)}
        for j, n in enumerate(pb):
            if n in pos_a:
                return pos_a[n] + j, n
        raise AssertionError("tree has a single root")

    def names_of(self, types: Iterable[int]) -> list[str]:
        return [self.names[k] for k in sorted(types)]


@dataclass(frozen=True)
class LabeledCorpus:
    """Mention triples with candidate type sets (and optional gold paths)."""

    mentions: tuple[Mention, ...]
    candidates: tuple[frozenset, ...]
    hierarchy: TypeHierarchy
    gold: tuple = ()

    def __post_init__(self):
        if len(self.candidates) != len(self.mentions):
            raise SchemaError("one candidate set per mention required")
        if self.gold and len(self.gold) != len(self.mentions):
            raise SchemaError("gold must be empty or aligned with mentions")

    @property
    def N(self) -> int:
        return len(self.mentions)

    def __len__(self):
        return len(self.mentions)

    def non_candidates(self, i: int) -> frozenset[int]:
        return frozenset(range(self.hierarchy.K)) - self.candidates[i]

    def with_candidates(self, candidates: Sequence[frozenset]) -> "LabeledCorpus":
        return replace(self, candidates=tuple(frozenset(c) for c in candidates))

    def subset(self, keep: Sequence[int]) -> "LabeledCorpus":
        keep = list(keep)
        return LabeledCorpus(
            mentions=tuple(self.mentions[i] for i in keep),
            candidates=tuple(self.candidates[i] for i in keep),
            hierarchy=self.hierarchy,
            gold=tuple(self.gold[i] for i in keep) if self.gold else (),
        )


@dataclass(frozen=True)
class KBFacts:
    facts: frozenset
    type_name_map: dict
    skipped: int = 0

    def entity_sets(self, hierarchy: TypeHierarchy) -> dict[int, frozenset]:
        """Per-target-type entity sets E_k (types without entities are absent)."""
        sets = defaultdict(set)
        for entity, kb_type in self.facts:
            sets[hierarchy.id_of(self.type_name_map[kb_type])].add(entity)
        return {k: frozenset(v) for k, v in sets.items()}


def _open_lines(path):
    path = Path(path)
    if not path.is_file():
        raise InputFileError(f"no such file: {path}")
    try:
        with path.open(encoding="utf-8") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc}") from exc


def _tsv_rows(path, width):
    for lineno, line in enumerate(_open_lines(path), 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) == 1 and width == 2:
            cols.append("")
        if len(cols) != width:
            raise SchemaError(f"{path}:{lineno}: expected {width} tab-separated columns")
        yield lineno, [c.strip() for c in cols]


def load_hierarchy(path) -> TypeHierarchy:
    """Read ``child<TAB>parent`` rows; an empty parent marks a top-level type."""
    names, parent_names = [], {}
    for lineno, (child, parent) in _tsv_rows(path, 2):
        if not child:
            raise SchemaError(f"{path}:{lineno}: empty type name")
        if child in parent_names:
            raise SchemaError(f"{path}:{lineno}: duplicate child {child!r}")
        names.append(child)
        parent_names[child] = parent
    index = {n: k for k, n in enumerate(names)}
    parents = []
    for n in names:
        p = parent_names[n]
        if p and p not in index:
            raise SchemaError(f"{path}: parent {p!r} of {n!r} is not declared")
        parents.append(index[p] if p else ROOT)
    if not names:
        raise SchemaError(f"{path}: empty hierarchy")
    return TypeHierarchy(tuple(names), tuple(parents))


def write_hierarchy(hierarchy: TypeHierarchy, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for name, p in zip(hierarchy.names, hierarchy.parents):
            fh.write(f"{name}\t{'' if p == ROOT else hierarchy.names[p]}\n")


def load_type_map(path) -> dict[str, str]:
    mapping = {}
    for lineno, (kb_type, target) in _tsv_rows(path, 2):
        if mapping.get(kb_type, target) != target:
            raise SchemaError(f"{path}:{lineno}: {kb_type!r} maps to more than one target type")
        mapping[kb_type] = target
    return mapping


def load_kb_facts(path, hierarchy: TypeHierarchy, type_map: dict | None = None) -> KBFacts:
    """Read ``entity<TAB>type`` facts, keeping those whose type maps into the hierarchy.

    Without ``type_map`` a KB type maps to the target type of the same name.
    """
    if type_map is None:
        type_map = {n: n for n in hierarchy.names}
    for kb_type, target in type_map.items():
        if target not in hierarchy:
            raise SchemaError(f"type map target {target!r} (from {kb_type!r}) not in hierarchy")
    facts, skipped = set(), 0
    for _, (entity, kb_type) in _tsv_rows(path, 2):
        if kb_type in type_map:
            facts.add((entity, kb_type))
        else:
            skipped += 1
    if skipped:
        logger.info("dropped %d KB facts with unmapped types", skipped)
    if not facts:
        logger.warning("no usable KB facts in %s", path)
    used = {t for _, t in facts}
    return KBFacts(frozenset(facts), {t: type_map[t] for t in used}, skipped)


def _guess_head(tokens: Sequence[TokenRecord], start: int) -> int:
    # a parsed span's head is the token governed from outside the span
    end = start + len(tokens)
    if all(t.dep_label is not None for t in tokens):
        outside = [i for i, t in enumerate(tokens)
                   if t.dep_governor is None or not start <= t.dep_governor < end]
        if len(outside) == 1:
            return outside[0]
    return len(tokens) - 1


def _aligned(record, key, n, lineno):
    values = record.get(key)
    if values is None:
        return [None] * n
    if not isinstance(values, list) or len(values) != n:
        raise SchemaError(f"line {lineno}: field {key!r} must align with the sentence ({n} tokens)")
    return values


def _parse_record(record, lineno, position, hierarchy, close):
    if not isinstance(record, dict):
        raise SchemaError(f"line {lineno}: record is not an object")
    words = record.get("tokens")
    if not isinstance(words, list) or not words or not all(isinstance(w, str) and w for w in words):
        raise SchemaError(f"line {lineno}: 'tokens' must be a non-empty list of strings")
    sentence = record.get("sentence") or words
    start = record.get("start")
    if start is None:
        start = next((s for s in range(len(sentence) - len(words) + 1)
                      if sentence[s:s + len(words)] == words), None)
        if start is None:
            raise SchemaError(f"line {lineno}: mention tokens not found in sentence")
    pos = _aligned(record, "pos", len(sentence), lineno)
    dep = _aligned(record, "dep", len(sentence), lineno)
    brown = _aligned(record, "brown", len(sentence), lineno)
    try:
        context = tuple(
            TokenRecord(w, p, d[0] if d else None,
                        (None if d[1] is None or d[1] < 0 else int(d[1])) if d else None, b)
            for w, p, d, b in zip(sentence, pos, dep, brown)
        )
        tokens = context[start:start + len(words)]
        if tuple(t.text for t in tokens) != tuple(words):
            raise SchemaError("mention tokens do not match the sentence at 'start'")
        head = record.get("head")
        mention = Mention(
            id=int(record.get("id", position)),
            tokens=tokens,
            head_index=_guess_head(tokens, start) if head is None else int(head),
            context=context,
            start=start,
            sentence_id=str(record.get("sentence_id", "")),
            entity_id=record.get("entity"),
            doc_id=record.get("doc"),
        )
        cand_names = record.get("candidates")
        if not isinstance(cand_names, list):
            raise SchemaError("'candidates' must be a list")
        if not cand_names:
            raise SchemaError("empty candidate set")
        cands = frozenset(hierarchy.id_of(n) for n in cand_names)
        if close:
            cands = hierarchy.close(cands)
        gold = record.get("gold")
        gold = None if gold is None else frozenset(hierarchy.id_of(n) for n in gold)
    except (SchemaError, TypeError, IndexError, ValueError) as exc:
        raise SchemaError(f"line {lineno}: {exc}") from exc
    if gold is not None and not hierarchy.is_path(gold):
        raise SchemaError(f"line {lineno}: gold types do not form a type-path")
    return mention, cands, gold


def load_corpus(path, hierarchy: TypeHierarchy, format: str = "jsonl",
                close_ancestors: bool = True) -> LabeledCorpus:
    """Parse a mention corpus; candidate sets are ancestor-closed unless disabled."""
    if format != "jsonl":
        raise SchemaError(f"unsupported corpus format {format!r}")
    mentions, cands, golds = [], [], []
    for lineno, line in enumerate(_open_lines(path), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: malformed record ({exc.msg})") from exc
        m, c, g = _parse_record(record, lineno, len(mentions), hierarchy, close_ancestors)
        mentions.append(m)
        cands.append(c)
        golds.append(g)
    has_gold = any(g is not None for g in golds)
    logger.info("loaded %d mentions from %s", len(mentions), path)
    return LabeledCorpus(tuple(mentions), tuple(cands), hierarchy,
                         tuple(golds) if has_gold else ())


def mention_record(mention: Mention, candidates, hierarchy: TypeHierarchy, gold=None) -> dict:
    ctx = mention.context
    rec = {"id": mention.id}
    if mention.doc_id is not None:
        rec["doc"] = mention.doc_id
    if mention.sentence_id:
        rec["sentence_id"] = mention.sentence_id
    if mention.entity_id is not None:
        rec["entity"] = mention.entity_id
    rec["sentence"] = [t.text for t in ctx]
    rec["start"] = mention.start
    rec["tokens"] = [t.text for t in mention.tokens]
    rec["head"] = mention.head_index
    if any(t.pos is not None for t in ctx):
        rec["pos"] = [t.pos for t in ctx]
    if any(t.dep_label is not None for t in ctx):
        rec["dep"] = [None if t.dep_label is None else
                      [t.dep_label, -1 if t.dep_governor is None else t.dep_governor] for t in ctx]
    if any(t.brown_path is not None for t in ctx):
        rec["brown"] = [t.brown_path for t in ctx]
    rec["candidates"] = hierarchy.names_of(candidates)
    if gold is not None:
        rec["gold"] = hierarchy.names_of(gold)
    return rec


def write_corpus(corpus: LabeledCorpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, m in enumerate(corpus.mentions):
            gold = corpus.gold[i] if corpus.gold else None
            rec = mention_record(m, corpus.candidates[i], corpus.hierarchy, gold)
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

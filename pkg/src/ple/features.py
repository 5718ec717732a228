"""Mention text features and the frequency-filtered feature vocabulary."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import LabeledCorpus, Mention
from .errors import ConfigError, InputFileError, SchemaError

logger = logging.getLogger(__name__)

FAMILIES = ("head", "token", "pos", "char", "shape", "length", "context", "brown", "dep")

# family -> string prefixes it emits; no prefix is a prefix of another family's
PREFIXES = {
    "head": ("HEAD_",),
    "token": ("TKN_",),
    "pos": ("POS_",),
    "char": ("TRI_",),
    "shape": ("SHAPE_",),
    "length": ("LEN_",),
    "context": ("CXT_B:", "CXT_A:"),
    "brown": ("BROWN_",),
    "dep": ("GOV:",),
}

MAX_LENGTH_BUCKET = 10


@dataclass(frozen=True)
class FeatureConfig:
    context_window: int = 3
    brown_prefix_lengths: tuple = (4, 8, 12)
    min_count: int = 2
    enabled_families: tuple = FAMILIES

    def __post_init__(self):
        if self.context_window < 0:
            raise ConfigError("context_window must be >= 0")
        if any(p <= 0 for p in self.brown_prefix_lengths):
            raise ConfigError("brown prefix lengths must be positive")
        if self.min_count < 1:
            raise ConfigError("min_count must be >= 1")
        unknown = set(self.enabled_families) - set(FAMILIES)
        if unknown:
            raise ConfigError(f"unknown feature families: {sorted(unknown)}")


def word_shape(token: str) -> str:
    """Map A/a/0/- per character class and collapse repeated symbols."""
    out = []
    for ch in token:
        if ch.isupper():
            sym = "A"
        elif ch.islower():
            sym = "a"
        elif ch.isdigit():
            sym = "0"
        else:
            sym = "-"
        if not out or out[-1] != sym:
            out.append(sym)
    return "".join(out)


def char_trigrams(head: str) -> list[str]:
    padded = ":" + head.lower() + ":"
    return [padded[i:i + 3] for i in range(len(padded) - 2)]


def _context_word(tok) -> str:
    # proper nouns keep their case; everything else is lowercased when tagged
    if tok.pos is None or tok.pos.startswith("NNP"):
        return tok.text
    return tok.text.lower()


def _window_ngrams(words):
    grams = list(words)
    grams += [f"{a} {b}" for a, b in zip(words, words[1:])]
    return grams


def extract_features(mention: Mention, config: FeatureConfig = FeatureConfig()) -> list[str]:
    """Feature strings for one mention, in a fixed family order (may repeat)."""
    fam = set(config.enabled_families)
    head = mention.head
    feats = []
    if "head" in fam:
        feats.append("HEAD_" + head.text)
    if "token" in fam:
        feats += ["TKN_" + t.text for t in mention.tokens]
    if "pos" in fam:
        feats += ["POS_" + t.pos for t in mention.tokens if t.pos is not None]
    if "char" in fam:
        feats += ["TRI_" + g for g in char_trigrams(head.text)]
    if "shape" in fam:
        feats += ["SHAPE_" + word_shape(t.text) for t in mention.tokens]
    if "length" in fam:
        n = len(mention.tokens)
        feats.append(f"LEN_{n}" if n <= MAX_LENGTH_BUCKET else f"LEN_{MAX_LENGTH_BUCKET}+")
    if "context" in fam and config.context_window > 0:
        w = config.context_window
        before = [_context_word(t) for t in mention.context[max(0, mention.start - w):mention.start]]
        after = [_context_word(t) for t in mention.context[mention.end:mention.end + w]]
        feats += ["CXT_B:" + g for g in _window_ngrams(before)]
        feats += ["CXT_A:" + g for g in _window_ngrams(after)]
    if "brown" in fam and head.brown_path:
        for p in sorted(config.brown_prefix_lengths):
            if p <= len(head.brown_path):
                feats.append(f"BROWN_{p}_{head.brown_path[:p]}")
    if "dep" in fam and head.dep_label is not None:
        feats.append("GOV:" + head.dep_label)
        gov = head.dep_governor
        if gov is not None and 0 <= gov < len(mention.context):
            feats.append("GOV:" + mention.context[gov].text.lower())
    return feats


def family_of(feature: str) -> str:
    for name, prefixes in PREFIXES.items():
        if feature.startswith(prefixes):
            return name
    raise ValueError(f"feature {feature!r} has no known family prefix")


@dataclass(frozen=True)
class FeatureVocabulary:
    strings: tuple[str, ...]
    counts: tuple[int, ...]
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {s: j for j, s in enumerate(self.strings)})
        if len(self.index) != len(self.strings):
            raise SchemaError("duplicate feature strings in vocabulary")

    @property
    def M(self) -> int:
        return len(self.strings)

    def __len__(self):
        return len(self.strings)

    def __contains__(self, feature):
        return feature in self.index

    def ids(self, features) -> list[int]:
        """Distinct in-vocabulary ids for a feature list, in first-seen order."""
        out = []
        for f in features:
            j = self.index.get(f)
            if j is not None and j not in out:
                out.append(j)
        return out


def count_features(corpus: LabeledCorpus, config: FeatureConfig = FeatureConfig()) -> Counter:
    counts = Counter()
    for m in corpus.mentions:
        counts.update(extract_features(m, config))
    return counts


def build_vocabulary(corpus: LabeledCorpus, config: FeatureConfig = FeatureConfig(),
                     counts: Counter | None = None) -> FeatureVocabulary:
    """Keep features occurring at least ``min_count`` times; ids follow string order.

    ``counts`` may be passed in when occurrence counts were aggregated elsewhere
    (e.g. summed over shards).
    """
    if counts is None:
        counts = count_features(corpus, config)
    kept = sorted(f for f, c in counts.items() if c >= config.min_count)
    if not kept:
        raise SchemaError(f"no feature occurs at least {config.min_count} times")
    logger.info("feature vocabulary: kept %d of %d distinct features", len(kept), len(counts))
    return FeatureVocabulary(tuple(kept), tuple(counts[f] for f in kept))


def write_vocabulary(vocab: FeatureVocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for j, (s, c) in enumerate(zip(vocab.strings, vocab.counts)):
            fh.write(f"{j}\t{s}\t{c}\n")


def load_vocabulary(path) -> FeatureVocabulary:
    path = Path(path)
    if not path.is_file():
        raise InputFileError(f"no such file: {path}")
    strings, counts = [], []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 3 or int(cols[0]) != len(strings):
                raise SchemaError(f"{path}:{lineno}: expected 'id<TAB>feature<TAB>count' with dense ids")
            strings.append(cols[1])
            counts.append(int(cols[2]))
    return FeatureVocabulary(tuple(strings), tuple(counts))

import json

import numpy as np
import pytest

from ple.corpus import ROOT, LabeledCorpus, Mention, TokenRecord, TypeHierarchy
from ple.graph import HeteroGraph


def tree(spec):
    """[(name, parent name or None), ...] -> TypeHierarchy."""
    names = [n for n, _ in spec]
    parents = [ROOT if p is None else names.index(p) for _, p in spec]
    return TypeHierarchy(tuple(names), tuple(parents))


PEOPLE = [
    ("person", None), ("artist", "person"), ("actor", "artist"), ("singer", "artist"),
    ("politician", "person"), ("businessman", "person"),
    ("location", None), ("city", "location"),
    ("organization", None), ("company", "organization"),
]


@pytest.fixture
def hier():
    return tree(PEOPLE)


def mention(words, start=0, length=1, i=0, head=None, pos=None, doc=None, entity=None):
    pos = pos or [None] * len(words)
    ctx = tuple(TokenRecord(w, p) for w, p in zip(words, pos))
    toks = ctx[start:start + length]
    return Mention(i, toks, length - 1 if head is None else head, ctx, start,
                   sentence_id=f"s{i}", entity_id=entity, doc_id=doc)


def corpus_of(h, cand_names, docs=None, gold=None):
    """One single-token mention per candidate list."""
    ms, cs = [], []
    for i, names in enumerate(cand_names):
        ms.append(mention([f"M{i}"], i=i, doc=None if docs is None else docs[i]))
        cs.append(h.close(h.id_of(n) for n in names))
    g = ()
    if gold is not None:
        g = tuple(frozenset(h.id_of(n) for n in names) for names in gold)
    return LabeledCorpus(tuple(ms), tuple(cs), h, g)


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


def random_graph(rng, N=None, M=None, K=None, variant="ple", p_mf=0.3):
    N = N or int(rng.integers(2, 21))
    M = M or int(rng.integers(2, 31))
    K = K or int(rng.integers(3, 8))
    my = []
    for i in range(N):
        # 1..K-1 candidates so both sides of the hinge exist
        n = int(rng.integers(1, K))
        my += [(i, k) for k in sorted(rng.choice(K, n, replace=False))]
    mf = [(i, j) for i in range(N) for j in range(M) if rng.random() < p_mf]
    if not mf:
        mf = [(0, 0)]
    yy, w = [], []
    if variant != "ple-noco":
        for a in range(K):
            for b in range(a + 1, K):
                if rng.random() < 0.5:
                    yy.append((a, b))
                    w.append(float(rng.uniform(0.1, 1.0)))
    return HeteroGraph(N, M, K, np.array(my), np.array(mf), np.array(yy).reshape(-1, 2),
                       np.array(w), variant)


# acceptance criteria record (number -> (passed, detail)); printed at the end of the run
ACCEPTANCE = {}


def record(n, passed, detail):
    ACCEPTANCE[n] = (bool(passed), detail)
    print(f"criterion {n}: {'PASS' if passed else 'FAIL'} | {detail}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'} | {detail}")

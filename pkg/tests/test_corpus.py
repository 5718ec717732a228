import logging

import pytest
from hypothesis import given, strategies as st

from conftest import PEOPLE, corpus_of, mention, tree, write_jsonl
from ple.corpus import (ROOT, TokenRecord, load_corpus, load_hierarchy, load_kb_facts,
                        load_type_map, write_corpus, write_hierarchy)
from ple.errors import InputFileError, SchemaError


def test_trump_has_five_candidates(tmp_path, hier):
    rec = {"tokens": ["Trump"], "candidates": ["person", "politician", "businessman", "artist", "actor"]}
    c = load_corpus(write_jsonl(tmp_path / "c.jsonl", [rec]), hier)
    assert c.N == 1
    assert len(c.candidates[0]) == 5
    assert c.mentions[0].tokens[0].text == "Trump"


def test_candidates_are_ancestor_closed(tmp_path, hier):
    c = load_corpus(write_jsonl(tmp_path / "c.jsonl", [{"tokens": ["X"], "candidates": ["actor"]}]), hier)
    assert set(hier.names_of(c.candidates[0])) == {"person", "artist", "actor"}


def test_closure_can_be_disabled(tmp_path, hier):
    p = write_jsonl(tmp_path / "c.jsonl", [{"tokens": ["X"], "candidates": ["actor"]}])
    c = load_corpus(p, hier, close_ancestors=False)
    assert hier.names_of(c.candidates[0]) == ["actor"]


def test_empty_candidates_rejected(tmp_path, hier):
    p = write_jsonl(tmp_path / "c.jsonl", [{"tokens": ["X"], "candidates": []}])
    with pytest.raises(SchemaError, match="line 1"):
        load_corpus(p, hier)


def test_unknown_type_named(tmp_path, hier):
    p = write_jsonl(tmp_path / "c.jsonl", [{"tokens": ["X"], "candidates": ["wizard"]}])
    with pytest.raises(SchemaError, match="wizard"):
        load_corpus(p, hier)


def test_malformed_line_reports_line_number(tmp_path, hier):
    p = tmp_path / "c.jsonl"
    p.write_text('{"tokens": ["X"], "candidates": ["person"]}\n{not json\n')
    with pytest.raises(SchemaError, match=":2:"):
        load_corpus(p, hier)


def test_gold_must_be_a_path(tmp_path, hier):
    p = write_jsonl(tmp_path / "c.jsonl", [{"tokens": ["X"], "candidates": ["actor"], "gold": ["actor"]}])
    with pytest.raises(SchemaError, match="type-path"):
        load_corpus(p, hier)


def test_missing_file(tmp_path, hier):
    with pytest.raises(InputFileError):
        load_corpus(tmp_path / "nope.jsonl", hier)


def test_mention_span_checks():
    with pytest.raises(SchemaError):
        mention(["a", "b"], start=1, length=2)
    with pytest.raises(SchemaError):
        mention(["a"], head=3)
    with pytest.raises(SchemaError):
        TokenRecord("x", brown_path="0120")
    with pytest.raises(SchemaError):
        TokenRecord("")


def test_head_from_parse(tmp_path, hier):
    # Turing hangs off Machine, Machine off "runs": Machine is the head
    rec = {"sentence": ["the", "Turing", "Machine", "runs"], "tokens": ["Turing", "Machine"],
           "dep": [["det", 2], ["nn", 2], ["nsubj", 3], ["root", -1]], "candidates": ["person"]}
    c = load_corpus(write_jsonl(tmp_path / "c.jsonl", [rec]), hier)
    assert c.mentions[0].head.text == "Machine"
    assert c.mentions[0].start == 1


def test_head_defaults_to_last_token(tmp_path, hier):
    c = load_corpus(write_jsonl(tmp_path / "c.jsonl", [{"tokens": ["Donald", "Trump"], "candidates": ["person"]}]), hier)
    assert c.mentions[0].head.text == "Trump"


def test_hierarchy_depths(tmp_path):
    p = tmp_path / "h.tsv"
    p.write_text("person\t\nartist\tperson\nactor\tartist\n")
    h = load_hierarchy(p)
    assert h.K == 3
    assert [h.depth(h.id_of(n)) for n in ("person", "artist", "actor")] == [1, 2, 3]
    assert h.children() == (h.id_of("person"),)


def test_single_type_hierarchy(tmp_path):
    p = tmp_path / "h.tsv"
    p.write_text("thing\n")
    h = load_hierarchy(p)
    assert h.K == 1 and h.parent(0) == ROOT


def test_cycle_rejected(tmp_path):
    p = tmp_path / "h.tsv"
    p.write_text("a\tb\nb\ta\n")
    with pytest.raises(SchemaError, match="cycle"):
        load_hierarchy(p)


def test_duplicate_child_rejected(tmp_path):
    p = tmp_path / "h.tsv"
    p.write_text("a\t\nb\ta\nb\t\n")
    with pytest.raises(SchemaError, match="duplicate"):
        load_hierarchy(p)


def test_hierarchy_round_trip(tmp_path, hier):
    p = tmp_path / "h.tsv"
    write_hierarchy(hier, p)
    assert load_hierarchy(p) == hier


def test_kb_entity_sets(tmp_path):
    h = tree([("person", None), ("actor", "person"), ("director", "person")])
    p = tmp_path / "kb.tsv"
    p.write_text("e1\tactor\ne2\tactor\ne1\tdirector\n")
    sets = load_kb_facts(p, h).entity_sets(h)
    assert sets[h.id_of("actor")] == {"e1", "e2"}
    assert sets[h.id_of("director")] == {"e1"}


def test_kb_unmapped_dropped_and_counted(tmp_path, hier):
    p = tmp_path / "kb.tsv"
    p.write_text("e1\tactor\ne1\t/film/actor\ne2\tgarbage\n")
    kb = load_kb_facts(p, hier)
    assert kb.skipped == 2
    assert kb.facts == {("e1", "actor")}


def test_kb_type_map(tmp_path, hier):
    (tmp_path / "map.tsv").write_text("/film/actor\tactor\n/people/person\tperson\n")
    (tmp_path / "kb.tsv").write_text("e1\t/film/actor\ne1\t/people/person\n")
    kb = load_kb_facts(tmp_path / "kb.tsv", hier, load_type_map(tmp_path / "map.tsv"))
    assert set(kb.entity_sets(hier)) == {hier.id_of("actor"), hier.id_of("person")}


def test_kb_empty_file_warns(tmp_path, hier, caplog):
    p = tmp_path / "kb.tsv"
    p.write_text("")
    with caplog.at_level(logging.WARNING):
        kb = load_kb_facts(p, hier)
    assert not kb.facts
    assert "no usable KB facts" in caplog.text


def test_kb_missing_file(tmp_path, hier):
    with pytest.raises(InputFileError):
        load_kb_facts(tmp_path / "kb.tsv", hier)


def test_corpus_round_trip(tmp_path, hier):
    recs = [
        {"id": 0, "doc": "d1", "entity": "m.1", "sentence": ["He", "met", "Trump", "."], "start": 2,
         "tokens": ["Trump"], "head": 0, "pos": ["PRP", "VBD", "NNP", "."],
         "dep": [["nsubj", 1], None, ["dobj", 1], None], "brown": ["0010", "1101", "111011", None],
         "candidates": ["politician", "businessman"], "gold": ["person", "politician"]},
        {"id": 1, "tokens": ["Paris"], "candidates": ["city"]},
    ]
    c1 = load_corpus(write_jsonl(tmp_path / "a.jsonl", recs), hier)
    write_corpus(c1, tmp_path / "b.jsonl")
    c2 = load_corpus(tmp_path / "b.jsonl", hier)
    assert c2 == c1
    assert c2.gold[1] is None


names = st.lists(st.sampled_from([n for n, _ in PEOPLE]), min_size=1, max_size=5)


@given(names)
def test_closure_idempotent_and_monotone(ns):
    h = tree(PEOPLE)
    s = {h.id_of(n) for n in ns}
    c = h.close(s)
    assert h.close(c) == c
    assert s <= c


@given(st.lists(names, min_size=1, max_size=6))
def test_candidates_and_complement_partition(sets):
    h = tree(PEOPLE)
    c = corpus_of(h, sets)
    for i in range(c.N):
        y, ybar = c.candidates[i], c.non_candidates(i)
        assert y | ybar == set(range(h.K))
        assert not y & ybar

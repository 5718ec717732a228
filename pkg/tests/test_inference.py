import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import PEOPLE, corpus_of, tree
from ple.errors import ConfigError, SchemaError
from ple.features import FeatureVocabulary, build_vocabulary
from ple.graph import build_graph
from ple.inference import (InferenceConfig, denoise_corpus, denoise_from_paths, embed_unseen_mention, infer_all,
                           infer_path_from_scores, infer_type_path, random_candidate_paths, retrain_loop)
from ple.metrics import loose_macro
from ple.synthetic import SyntheticConfig, generate
from ple.trainer import EmbeddingStore, TrainingConfig


def scores_for(h, named, default=0.0):
    s = np.full(h.K, default)
    for n, v in named.items():
        s[h.id_of(n)] = v
    return s


def ids(h, *names):
    return {h.id_of(n) for n in names}


def test_hand_traced_path(hier):
    s = scores_for(hier, {"person": 2.0, "politician": 1.5, "artist": 0.9, "actor": 0.05})
    path = infer_path_from_scores(s, ids(hier, "person", "artist", "actor", "politician"), hier, 0.1)
    assert [hier.names[k] for k in path] == ["person", "politician"]


def test_all_below_threshold_gives_empty_path(hier):
    s = scores_for(hier, {"person": 0.1, "artist": 0.05})
    assert infer_path_from_scores(s, ids(hier, "person", "artist"), hier, 0.1) == ()


def test_single_chain(hier):
    s = scores_for(hier, {"person": 0.5, "artist": 0.3})
    assert infer_path_from_scores(s, ids(hier, "person", "artist"), hier) == (0, 1)


def test_ties_pick_smallest_id(hier):
    s = scores_for(hier, {"person": 1.0, "location": 1.0, "artist": 1.0, "politician": 1.0})
    c = ids(hier, "person", "location", "artist", "politician")
    assert [hier.names[k] for k in infer_path_from_scores(s, c, hier)] == ["person", "artist"]


def test_search_stays_in_candidates(hier):
    s = scores_for(hier, {"person": 1.0, "actor": 9.0, "artist": 0.5})
    assert infer_path_from_scores(s, ids(hier, "person", "artist"), hier) == (0, 1)


def test_infer_type_path_uses_dot_products(hier):
    V = np.zeros((hier.K, 2))
    V[hier.id_of("person")] = [1, 0]
    V[hier.id_of("politician")] = [0, 1]
    V[hier.id_of("artist")] = [0, -1]
    e = EmbeddingStore(np.array([[0.5, 0.5]]), np.zeros((1, 2)), V, V.copy())
    c = ids(hier, "person", "politician", "artist")
    assert infer_type_path(0, e, c, hier) == (hier.id_of("person"), hier.id_of("politician"))


def test_unseen_mention_pooling():
    vocab = FeatureVocabulary(("a", "b", "c", "d"), (2, 2, 2, 2))
    C = np.array([[1.0, 2.0], [-1.0, -2.0], [3.0, 0.0], [0.5, 0.5]])
    e = EmbeddingStore(np.zeros((1, 2)), C, np.zeros((1, 2)), np.zeros((1, 2)))
    assert np.array_equal(embed_unseen_mention(["a", "zzz"], vocab, e), C[0])
    assert np.array_equal(embed_unseen_mention(["a", "b"], vocab, e), [0.0, 0.0])
    assert np.allclose(embed_unseen_mention(["a", "c", "d", "a"], vocab, e), (C[0] + C[2] + C[3]) / 3)
    assert np.allclose(embed_unseen_mention(["a", "c"], vocab, e, "sum"), C[0] + C[2])
    with pytest.raises(ValueError, match="untypeable"):
        embed_unseen_mention(["zzz"], vocab, e)


def test_inference_config_validation():
    with pytest.raises(ConfigError):
        InferenceConfig(unseen_pooling="max")
    with pytest.raises(ConfigError):
        InferenceConfig(eta=float("nan"))


def emb_for_scores(S):
    """Embeddings whose score matrix U V^T equals S (U = S, V = identity)."""
    S = np.asarray(S, float)
    N, K = S.shape
    return EmbeddingStore(S.copy(), np.zeros((1, K)), np.eye(K), np.eye(K))


def test_denoise_trump(hier):
    c = corpus_of(hier, [["politician", "businessman", "actor"], ["person"]])
    S = np.stack([scores_for(hier, {"person": 2.0, "politician": 1.2, "businessman": 0.4, "artist": 0.3}),
                  scores_for(hier, {"person": 0.01})])
    res = denoise_corpus(c, emb_for_scores(S))
    assert res.kept == (0,) and res.dropped == (1,)
    assert res.drop_rate == 0.5
    assert hier.names_of(res.corpus.candidates[0]) == ["person", "politician"]


def test_denoise_keeps_single_correct_path(hier):
    c = corpus_of(hier, [["actor"]])
    res = denoise_corpus(c, emb_for_scores([scores_for(hier, {}, default=1.0)]))
    assert res.corpus.candidates == c.candidates


def test_denoise_id_mismatch(hier):
    c = corpus_of(hier, [["actor"], ["city"]])
    with pytest.raises(SchemaError):
        denoise_corpus(c, emb_for_scores(np.ones((3, hier.K))))
    with pytest.raises(SchemaError):
        denoise_corpus(c, emb_for_scores(np.ones((2, hier.K - 1))))


def test_random_paths_end_at_candidate_leaves(hier):
    c = corpus_of(hier, [["actor", "singer", "city"]] * 30)
    seen = set()
    for p in random_candidate_paths(c, np.random.default_rng(0)):
        assert set(p) <= c.candidates[0] and hier.is_path(p)
        seen.add(p[-1])
    assert seen == ids(hier, "actor", "singer", "city")


type_names = [n for n, _ in PEOPLE]


@st.composite
def scored_candidates(draw):
    h = tree(PEOPLE)
    cands = h.close(h.id_of(n) for n in draw(st.lists(st.sampled_from(type_names), min_size=1, max_size=4)))
    scores = draw(st.lists(st.floats(-2, 2), min_size=h.K, max_size=h.K))
    return h, cands, np.array(scores)


@given(scored_candidates(), st.floats(-1, 1), st.floats(0, 1))
def test_path_properties(case, eta, bump):
    h, cands, s = case
    path = infer_path_from_scores(s, cands, h, eta)
    assert set(path) <= cands
    assert h.is_path(path)
    assert list(path) == sorted(path, key=h.depth)
    longer_eta = infer_path_from_scores(s, cands, h, eta + bump)
    assert len(longer_eta) <= len(path)
    assert path[:len(longer_eta)] == longer_eta


@settings(max_examples=30)
@given(st.lists(st.lists(st.sampled_from(type_names), min_size=1, max_size=3), min_size=1, max_size=8),
       st.data())
def test_recall_bounded_by_raw_candidates(cand_names, data):
    h = tree(PEOPLE)
    gold = []
    for names in cand_names:
        leaf = data.draw(st.sampled_from(type_names))
        gold.append(h.path(h.id_of(leaf)))
    c = corpus_of(h, cand_names, gold=[[h.names[k] for k in g] for g in gold])
    S = data.draw(st.lists(st.lists(st.floats(-2, 2), min_size=h.K, max_size=h.K),
                           min_size=c.N, max_size=c.N))
    paths = infer_all(emb_for_scores(S), c)
    assert loose_macro(paths, c.gold)[1] <= loose_macro(c.candidates, c.gold)[1] + 1e-12


def test_denoise_from_paths_counts(hier):
    c = corpus_of(hier, [["actor"], ["city"], ["company"]])
    res = denoise_from_paths(c, [(0,), (), (8, 9)])
    assert res.kept == (0, 2) and res.dropped == (1,)
    assert res.corpus.N == 2
    assert res.corpus.mentions[1] is c.mentions[2]


def test_retrain_loop_searches_original_candidates():
    ds = generate(SyntheticConfig(n_mentions=60, seed=1))
    vocab = build_vocabulary(ds.corpus, ds.feature_config)
    g = build_graph(ds.corpus, vocab, "ple-coh", feature_config=ds.feature_config)
    seen = []
    rounds = retrain_loop(g, ds.corpus, TrainingConfig(d=8, max_iters=4, variant="ple-coh"), iters=3,
                          on_round=lambda r, res, paths: seen.append(r))
    assert len(rounds) == 3 and seen == [0, 1, 2]
    for _, paths in rounds:
        for p, cands in zip(paths, ds.corpus.candidates):
            assert set(p) <= cands


def test_retrain_loop_needs_a_round():
    ds = generate(SyntheticConfig(n_mentions=20))
    vocab = build_vocabulary(ds.corpus, ds.feature_config)
    g = build_graph(ds.corpus, vocab, "ple-noco", feature_config=ds.feature_config)
    with pytest.raises(ConfigError):
        retrain_loop(g, ds.corpus, TrainingConfig(variant="ple-noco"), iters=0)

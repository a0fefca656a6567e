"""Tests for SIF-weighted term embeddings and their supporting tables."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hetlink.termembed import (
    DEFAULT_SIF_A,
    DEFAULT_UNSEEN_P,
    FrequencyTable,
    SifConfig,
    TermEmbedError,
    WordVectorStore,
    fallback_vector,
    init_node_features,
    load_word_vectors,
    random_word_vectors,
    sif_weight,
    term_embedding,
)


# ---------------------------------------------------------------------------
# word vector store


def test_store_lookup_and_contains():
    store = WordVectorStore({"aspirin": np.ones(3)}, dim=3)
    assert "aspirin" in store
    assert "ibuprofen" not in store
    assert len(store) == 1
    np.testing.assert_array_equal(store.get("aspirin"), np.ones(3))


def test_fallback_vector_is_deterministic_and_unit_scale():
    v1 = fallback_vector("zorp", 16, seed=3)
    v2 = fallback_vector("zorp", 16, seed=3)
    v3 = fallback_vector("zorp", 16, seed=4)
    np.testing.assert_array_equal(v1, v2)
    assert not np.array_equal(v1, v3)
    assert v1.shape == (16,)


def test_store_get_unseen_token_uses_fallback():
    store = WordVectorStore({"a": np.zeros(8)}, dim=8, fallback_seed=5)
    v = store.get("never-seen")
    np.testing.assert_array_equal(v, fallback_vector("never-seen", 8, seed=5))


def test_store_roundtrip_through_text_file(tmp_path):
    store = random_word_vectors(["alpha", "beta", "gamma"], dim=6, seed=2)
    path = tmp_path / "vecs.txt"
    store.save(path)
    loaded = load_word_vectors(path)
    assert loaded.dim == 6
    for tok in ("alpha", "beta", "gamma"):
        np.testing.assert_allclose(loaded.get(tok), store.get(tok), atol=1e-6)


def test_load_word_vectors_rejects_ragged_rows(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("a 1.0 2.0\nb 1.0\n")
    with pytest.raises(TermEmbedError):
        load_word_vectors(path)


# ---------------------------------------------------------------------------
# frequency table


def test_frequency_table_from_corpus_normalizes():
    t = FrequencyTable.from_corpus([["a", "a", "b"], ["b", "c", "b"]])
    assert t.p("a") == pytest.approx(2 / 6)
    assert t.p("b") == pytest.approx(3 / 6)
    assert t.p("c") == pytest.approx(1 / 6)


def test_frequency_table_unseen_token_default():
    t = FrequencyTable({"a": 1.0})
    assert t.p("zzz") == DEFAULT_UNSEEN_P


def test_frequency_table_tsv_roundtrip(tmp_path):
    t = FrequencyTable.from_corpus([["x", "y", "y"]])
    path = tmp_path / "freqs.tsv"
    t.save_tsv(path)
    loaded = FrequencyTable.load_tsv(path)
    for tok in ("x", "y"):
        assert loaded.p(tok) == pytest.approx(t.p(tok), rel=1e-9)


# ---------------------------------------------------------------------------
# SIF weighting


def test_sif_weight_matches_closed_form():
    freqs = FrequencyTable({"the": 0.05, "nausea": 0.001})
    cfg = SifConfig(a=1e-3)
    assert sif_weight("the", freqs, cfg) == pytest.approx(1e-3 / (1e-3 + 0.05))
    assert sif_weight("nausea", freqs, cfg) == pytest.approx(1e-3 / (1e-3 + 0.001))


def test_sif_weight_downweights_frequent_tokens():
    freqs = FrequencyTable({"common": 0.1, "rare": 1e-6})
    cfg = SifConfig()
    assert sif_weight("rare", freqs, cfg) > sif_weight("common", freqs, cfg)


def test_sif_config_rejects_nonpositive_a():
    with pytest.raises(TermEmbedError):
        SifConfig(a=0.0)


def test_term_embedding_matches_manual_weighted_mean():
    store = WordVectorStore({"acute": np.array([1.0, 0.0]),
                             "failure": np.array([0.0, 1.0])}, dim=2)
    freqs = FrequencyTable({"acute": 0.01, "failure": 0.001})
    cfg = SifConfig(a=1e-3)
    w1 = 1e-3 / (1e-3 + 0.01)
    w2 = 1e-3 / (1e-3 + 0.001)
    expected = (w1 * np.array([1.0, 0.0]) + w2 * np.array([0.0, 1.0])) / (w1 + w2)
    np.testing.assert_allclose(term_embedding("Acute Failure", store, freqs, cfg), expected)


def test_term_embedding_single_token_equals_its_vector():
    store = random_word_vectors(["solo"], dim=5, seed=0)
    freqs = FrequencyTable({"solo": 0.2})
    np.testing.assert_allclose(term_embedding("solo", store, freqs), store.get("solo"))


def test_term_embedding_empty_term_raises():
    store = random_word_vectors(["a"], dim=4)
    with pytest.raises(TermEmbedError):
        term_embedding([], store, FrequencyTable({"a": 1.0}))


@given(st.lists(st.sampled_from(["red", "green", "blue", "cyan"]), min_size=1, max_size=6))
def test_term_embedding_in_convex_hull_of_word_vectors(tokens):
    # A weighted mean with positive weights stays inside the per-coordinate
    # range of its inputs.
    store = random_word_vectors(["red", "green", "blue", "cyan"], dim=4, seed=9)
    freqs = FrequencyTable.from_corpus([["red", "green", "green", "blue", "cyan"]])
    emb = term_embedding(tokens, store, freqs)
    vecs = np.stack([store.get(t) for t in tokens])
    assert np.all(emb >= vecs.min(axis=0) - 1e-12)
    assert np.all(emb <= vecs.max(axis=0) + 1e-12)


# ---------------------------------------------------------------------------
# node feature initialization


def test_init_node_features_orders_rows_by_node_id(toy_kb, toy_store, toy_freqs):
    feats = init_node_features(toy_kb, toy_store, toy_freqs)
    assert feats.shape == (len(list(toy_kb.nodes())), toy_store.dim)
    for node in toy_kb.nodes():
        np.testing.assert_allclose(
            feats[node.id], term_embedding(node.name, toy_store, toy_freqs))


def test_init_node_features_prefers_preset_features(toy_store, toy_freqs):
    from hetlink.hetgraph import HeteroGraph

    g = HeteroGraph()
    g.add_node("a", "Drug", "Aspirin", features=np.arange(16, dtype=float))
    g.freeze()
    feats = init_node_features(g, toy_store, toy_freqs)
    np.testing.assert_array_equal(feats[0], np.arange(16, dtype=float))


def test_init_node_features_requires_frozen_graph(toy_store, toy_freqs):
    from hetlink.hetgraph import HeteroGraph

    g = HeteroGraph()
    g.add_node("a", "Drug", "Aspirin")
    with pytest.raises(TermEmbedError):
        init_node_features(g, toy_store, toy_freqs)

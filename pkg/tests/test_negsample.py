"""Tests for semantic x structural hard-negative sampling.

The 1-hop edit distance is validated against an exhaustive edit-script
search over the two neighborhood multisets.
"""

import itertools
import json
from collections import Counter

import numpy as np
import pytest

from hetlink.negsample import (
    HardNegativeSampler,
    NegSampleError,
    ged_1hop,
    generate_hard_negatives,
    neighborhood_signature,
    score,
    semantic_similarity,
    structural_similarity,
    uniform_negatives,
)

from conftest import random_hetero_graph


def brute_force_ged(sig_u, sig_v):
    """Cheapest edit script turning sig_u's triple multiset into sig_v's.

    Operations: delete a triple (cost 1), insert a triple (cost 1).  Equal
    triples can be kept for free; the optimal script keeps a maximum
    common sub-multiset, which we find by trying every subset size of the
    intersection (small inputs make this affordable).
    """
    a, b = Counter(sig_u.triples), Counter(sig_v.triples)
    best = None
    common = list((a & b).elements())
    # keep any sub-multiset of the common part; keeping more is never worse,
    # but enumerate everything to stay assumption-free
    for r in range(len(common) + 1):
        for kept in set(itertools.combinations(sorted(common), r)):
            kept_c = Counter(kept)
            if kept_c - a or kept_c - b:
                continue
            cost = (sum((a - kept_c).values())   # deletions
                    + sum((b - kept_c).values()))  # insertions
            best = cost if best is None else min(best, cost)
    if sig_u.center_type != sig_v.center_type:
        best += 1
    return best


# ---------------------------------------------------------------------------
# signatures and distance


def test_signature_collects_typed_neighbor_triples(toy_kb):
    sig = neighborhood_signature(toy_kb, toy_kb.ids["nausea"])
    assert sig.center_type == "AdverseEffect"
    assert ("CAUSE", "Drug", "aspirin") in sig.triples
    assert ("INDICATE", "Finding", "nephrotoxicity") in sig.triples
    assert len(sig.triples) == 4


def test_signature_without_names_blanks_surface(toy_kb):
    sig = neighborhood_signature(toy_kb, toy_kb.ids["nausea"], use_names=False)
    assert all(name == "" for _, _, name in sig.triples)


def test_ged_identical_signatures_is_zero(toy_kb):
    sig = neighborhood_signature(toy_kb, toy_kb.ids["Fever"])
    assert ged_1hop(sig, sig) == 0


def test_ged_center_type_mismatch_adds_one(toy_kb):
    sig_d = neighborhood_signature(toy_kb, toy_kb.ids["Aspirin"])
    sig_f = neighborhood_signature(toy_kb, toy_kb.ids["proteinuria"])
    # proteinuria's single triple differs from both of Aspirin's: all three
    # must be rewritten, plus one for the differing center type.
    assert ged_1hop(sig_d, sig_f) == 2 + 1 + 1


@pytest.mark.parametrize("graph_seed", range(20))
def test_ged_matches_exhaustive_edit_search(graph_seed):
    rng = np.random.default_rng(1000 + graph_seed)
    g = random_hetero_graph(rng, n_nodes=10, n_types=3, n_edge_types=2,
                            edge_prob=0.18, max_degree=5)
    ids = g.node_ids
    u, v = rng.choice(ids, size=2, replace=False)
    sig_u = neighborhood_signature(g, int(u))
    sig_v = neighborhood_signature(g, int(v))
    assert ged_1hop(sig_u, sig_v) == brute_force_ged(sig_u, sig_v)


def test_ged_is_symmetric_and_triangle_like(toy_kb):
    sigs = [neighborhood_signature(toy_kb, v) for v in toy_kb.node_ids]
    for a in sigs:
        for b in sigs:
            assert ged_1hop(a, b) == ged_1hop(b, a)


# ---------------------------------------------------------------------------
# similarity scores


def test_semantic_similarity_bounds_and_extremes():
    emb = np.array([[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 0.0]])
    assert semantic_similarity(0, 1, emb) == pytest.approx(1.0)
    assert semantic_similarity(0, 2, emb) == pytest.approx(0.0)
    assert semantic_similarity(0, 3, emb) == 0.0   # zero vector -> 0 with warning


def test_structural_similarity_self_is_one(toy_kb):
    for v in toy_kb.node_ids:
        assert structural_similarity(v, v, toy_kb) == pytest.approx(1.0)


def test_score_is_product_and_symmetric(toy_kb):
    rng = np.random.default_rng(0)
    emb = rng.standard_normal((len(toy_kb), 8))
    u, v = toy_kb.ids["nausea"], toy_kb.ids["Diarrhea"]
    s = score(u, v, toy_kb, emb)
    assert s == pytest.approx(semantic_similarity(u, v, emb)
                              * structural_similarity(u, v, toy_kb))
    assert s == pytest.approx(score(v, u, toy_kb, emb))
    assert 0.0 <= s <= 1.0


# ---------------------------------------------------------------------------
# samplers


@pytest.fixture
def toy_emb(toy_kb):
    return np.random.default_rng(3).standard_normal((len(toy_kb), 8))


def test_hard_sampler_ranks_neighbors_by_score(toy_kb, toy_emb):
    sampler = HardNegativeSampler(toy_kb, toy_emb)
    gold = toy_kb.ids["nausea"]
    ranked = sampler.ranked(gold)
    assert [c.node for c in ranked] != []
    sims = [c.sim for c in ranked]
    assert sims == sorted(sims, reverse=True)
    assert {c.node for c in ranked} == toy_kb.neighbors(gold)


def test_hard_sampler_tops_up_with_uniform_when_few_neighbors(toy_kb, toy_emb):
    sampler = HardNegativeSampler(toy_kb, toy_emb)
    gold = toy_kb.ids["proteinuria"]          # single neighbor
    negatives, provenance = sampler.sample(gold, 4, np.random.default_rng(0))
    assert len(negatives) == 4
    assert provenance.count("hard") == 1
    assert provenance.count("uniform") == 3
    assert gold not in negatives
    assert len(set(negatives)) == 4


def test_hard_sampler_exclude_drops_known_false_negatives(toy_kb, toy_emb):
    sampler = HardNegativeSampler(toy_kb, toy_emb)
    gold = toy_kb.ids["nausea"]
    exclude = frozenset({toy_kb.ids["Aspirin"]})
    rng = np.random.default_rng(0)
    for _ in range(20):
        negatives, _ = sampler.sample(gold, 2, rng, exclude=exclude)
        assert toy_kb.ids["Aspirin"] not in negatives


def test_hard_sampler_requires_frozen_kb(toy_emb):
    from hetlink.hetgraph import HeteroGraph

    g = HeteroGraph()
    g.add_node("Drug", "Aspirin")
    with pytest.raises(NegSampleError):
        HardNegativeSampler(g, toy_emb)


def test_generate_hard_negatives_deterministic(toy_kb, toy_emb):
    positives = [("nausea", toy_kb.ids["nausea"]), ("fever", toy_kb.ids["Fever"])]
    p1 = generate_hard_negatives(positives, toy_kb, k=2, seed=5, embeddings=toy_emb)
    p2 = generate_hard_negatives(positives, toy_kb, k=2, seed=5, embeddings=toy_emb)
    p3 = generate_hard_negatives(positives, toy_kb, k=2, seed=6, embeddings=toy_emb)
    assert [e.negatives for e in p1.entries] == [e.negatives for e in p2.entries]
    assert [e.negatives for e in p1.entries] != [e.negatives for e in p3.entries]


def test_uniform_negatives_exclude_gold_and_are_deterministic(toy_kb):
    positives = [("nausea", toy_kb.ids["nausea"])] * 20
    pool = uniform_negatives(positives, toy_kb, k=3, seed=1)
    for e in pool.entries:
        assert toy_kb.ids["nausea"] not in e.negatives
        assert len(set(e.negatives)) == 3
        assert e.provenance == ["uniform"] * 3
    again = uniform_negatives(positives, toy_kb, k=3, seed=1)
    assert [e.negatives for e in pool.entries] == [e.negatives for e in again.entries]


def test_k_validation_and_small_kb_errors(toy_kb, toy_emb):
    with pytest.raises(NegSampleError):
        generate_hard_negatives([], toy_kb, k=0, seed=0, embeddings=toy_emb)
    with pytest.raises(NegSampleError):
        uniform_negatives([], toy_kb, k=0, seed=0)
    with pytest.raises(NegSampleError):
        uniform_negatives([("x", 0)], toy_kb, k=len(toy_kb), seed=0)


def test_pool_dump_jsonl_roundtrips_fields(toy_kb, toy_emb, tmp_path):
    pool = generate_hard_negatives([("nausea", toy_kb.ids["nausea"])],
                                   toy_kb, k=2, seed=0, embeddings=toy_emb)
    path = tmp_path / "pool.jsonl"
    pool.dump_jsonl(path)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(rows) == 1
    assert rows[0]["mention"] == "nausea"
    assert rows[0]["sampled"] == pool.entries[0].negatives
    assert all(set(n) == {"node", "sim_se", "sim_st", "sim"}
               for n in rows[0]["negatives"])

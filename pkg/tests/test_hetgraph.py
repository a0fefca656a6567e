import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetlink.hetgraph import (GraphError, HeteroGraph, InvertedIndex, Metapath,
                              SELF_EDGE_TYPE, build_inverted_index,
                              default_acronym_rule, load_graph, load_metapaths,
                              normalize, save_graph, tokenize)
from conftest import random_hetero_graph


def test_normalize_casefolds_and_strips_punctuation():
    assert normalize("Acute  Renal-Failure!") == "acute renal failure"
    assert tokenize("Aspirin, 100mg") == ["aspirin", "100mg"]


def test_add_node_assigns_dense_ids():
    g = HeteroGraph()
    assert g.add_node("Drug", "a") == 0
    assert g.add_node("Drug", "b") == 1
    assert g.node(1).surface == "b"


def test_edge_requires_known_endpoints():
    g = HeteroGraph()
    g.add_node("Drug", "a")
    with pytest.raises(GraphError):
        g.add_edge(0, 5, "TREAT")


def test_freeze_adds_self_loop_schema_and_is_idempotent(toy_kb):
    assert toy_kb.frozen
    assert ("Drug", SELF_EDGE_TYPE, "Drug") in toy_kb.schema.triples
    before = len(toy_kb.edges)
    toy_kb.freeze()
    assert len(toy_kb.edges) == before


def test_mutation_after_freeze_fails(toy_kb):
    with pytest.raises(GraphError):
        toy_kb.add_node("Drug", "late")


def test_neighbors_by_relation_ignores_direction(toy_kb):
    nausea = toy_kb.ids["nausea"]
    assert toy_kb.ids["Aspirin"] in toy_kb.neighbors_by_relation(nausea, "CAUSE")
    assert toy_kb.ids["acute renal failure"] in \
        toy_kb.neighbors_by_relation(nausea, "INDICATE")


def test_schema_connecting(toy_kb):
    triples = toy_kb.schema.connecting("Drug", "AdverseEffect")
    assert ("Drug", "CAUSE", "AdverseEffect") in triples


def test_metapath_parse_roundtrip():
    p = Metapath.parse("Drug-CAUSE-AdverseEffect-INDICATE-Finding")
    assert p.node_types == ("Drug", "AdverseEffect", "Finding")
    assert p.edge_types == ("CAUSE", "INDICATE")
    assert Metapath.parse(p.label()) == p


def test_metapath_rejects_malformed():
    with pytest.raises(GraphError):
        Metapath.parse("Drug-CAUSE")


def test_metapath_instances_toy(toy_kb, daf_metapath):
    fever = toy_kb.ids["Fever"]
    inst = toy_kb.metapath_instances(fever, daf_metapath, anchor="end")
    assert inst == [(toy_kb.ids["Metformin"], toy_kb.ids["Diarrhea"], fever)]


def _brute_force_instances(graph, path, target):
    """Oracle: enumerate every node sequence and filter by type/edge pattern."""
    results = []

    def ok_edge(u, v, etype):
        return v in graph.out_neighbors(u, etype)

    def extend(seq):
        pos = len(seq)
        if pos == len(path.node_types):
            if seq[-1] == target:
                results.append(tuple(seq))
            return
        for node in graph.node_ids:
            if graph.node(node).type != path.node_types[pos]:
                continue
            if seq and not ok_edge(seq[-1], node, path.edge_types[pos - 1]):
                continue
            extend(seq + [node])

    extend([])
    return sorted(results)


def test_metapath_instances_match_brute_force_oracle():
    rng = np.random.default_rng(11)
    for trial in range(50):
        g = random_hetero_graph(rng, n_nodes=int(rng.integers(5, 20)))
        types = sorted(g.node_types)
        etypes = sorted(set(g.edge_types) - {SELF_EDGE_TYPE})
        if not etypes:
            continue
        # random walk over schema triples so the path is always valid
        triples = sorted(t for t in g.schema.triples if t[1] != SELF_EDGE_TYPE)
        if not triples:
            continue
        length = int(rng.integers(1, 5))
        first = triples[int(rng.integers(len(triples)))]
        node_types, edge_types = [first[0], first[2]], [first[1]]
        for _ in range(length - 1):
            nxt = [t for t in triples if t[0] == node_types[-1]]
            if not nxt:
                break
            s, e, d = nxt[int(rng.integers(len(nxt)))]
            node_types.append(d)
            edge_types.append(e)
        path = Metapath(tuple(node_types), tuple(edge_types))
        for v in g.node_ids:
            if g.node(v).type != path.tail:
                continue
            assert g.metapath_instances(v, path, anchor="end") == \
                _brute_force_instances(g, path, v)


def test_metapath_neighbors_excludes_anchor(toy_kb, daf_metapath):
    fever = toy_kb.ids["Fever"]
    nbrs = toy_kb.metapath_neighbors(fever, daf_metapath)
    assert nbrs == {toy_kb.ids["Metformin"], toy_kb.ids["Diarrhea"]}


def test_inverted_index_covers_names_synonyms_acronyms():
    g = HeteroGraph()
    g.add_node("Finding", "acute renal failure", synonyms=("kidney failure",))
    g.freeze()
    idx = build_inverted_index(g)
    assert idx.lookup("Acute Renal Failure") == {0}
    assert idx.lookup("kidney failure") == {0}
    assert idx.lookup("arf") == {0}          # initials
    assert idx.lookup("unrelated") == set()


def test_acronym_rule_needs_two_tokens():
    assert default_acronym_rule(("fever",)) == []
    assert default_acronym_rule(("acute", "renal", "failure")) == ["arf"]


def test_index_merges_colliding_keys():
    g = HeteroGraph()
    g.add_node("Finding", "acute renal failure")
    g.add_node("Finding", "acute respiratory failure")
    g.freeze()
    idx = build_inverted_index(g)
    assert idx.lookup("ARF") == {0, 1}


def test_tsv_roundtrip(tmp_path, toy_kb):
    nodes = tmp_path / "nodes.tsv"
    edges = tmp_path / "edges.tsv"
    save_graph(toy_kb, nodes, edges)
    back = load_graph(nodes, edges)
    assert len(back) == len(toy_kb)
    assert {(e.src, e.dst, e.type) for e in back.edges} == \
        {(e.src, e.dst, e.type) for e in toy_kb.edges}
    for nid in toy_kb.node_ids:
        assert back.node(nid).surface == toy_kb.node(nid).surface
        assert back.node(nid).type == toy_kb.node(nid).type


def test_malformed_tsv_reports_line_number(tmp_path):
    bad = tmp_path / "nodes.tsv"
    bad.write_text("0\tDrug\taspirin\t\t\n1\tDrug\n")
    with pytest.raises(GraphError, match=":2:"):
        load_graph(bad, None)


def test_load_metapaths(tmp_path):
    f = tmp_path / "paths.txt"
    f.write_text("Drug-CAUSE-AdverseEffect\n\nDrug-TREAT-Symptom\n")
    paths = load_metapaths(f)
    assert [p.label() for p in paths] == ["Drug-CAUSE-AdverseEffect",
                                         "Drug-TREAT-Symptom"]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_metapath_instances_deterministic_and_typed(seed):
    rng = np.random.default_rng(seed)
    g = random_hetero_graph(rng, n_nodes=12)
    triples = sorted(t for t in g.schema.triples if t[1] != SELF_EDGE_TYPE)
    if not triples:
        return
    s, e, d = triples[int(rng.integers(len(triples)))]
    path = Metapath((s, d), (e,))
    for v in g.node_ids:
        if g.node(v).type != path.tail:
            continue
        inst = g.metapath_instances(v, path, anchor="end")
        assert inst == g.metapath_instances(v, path, anchor="end")
        for seq in inst:
            assert [g.node(n).type for n in seq] == list(path.node_types)
            assert seq[-1] == v

import numpy as np
import pytest

from hetlink.hetgraph import HeteroGraph, Metapath, build_inverted_index
from hetlink.querygraph import Mention, TextSnippet
from hetlink.termembed import FrequencyTable, random_word_vectors


@pytest.fixture
def toy_kb():
    """Small medical KB with Drug/AdverseEffect/Symptom/Finding nodes.

    Holds the classic facts: Metformin causes Diarrhea which indicates Fever,
    Aspirin causes nausea which indicates renal findings, and the ambiguous
    "ARF" surface resolves between the two acute-failure findings.
    """
    g = HeteroGraph()
    ids = {}
    for name, ntype, syns in [
        ("Aspirin", "Drug", ()),
        ("Metformin", "Drug", ()),
        ("nausea", "AdverseEffect", ()),
        ("Diarrhea", "AdverseEffect", ()),
        ("headache", "Symptom", ()),
        ("acute renal failure", "Finding", ()),
        ("acute respiratory failure", "Finding", ()),
        ("nephrotoxicity", "Finding", ()),
        ("proteinuria", "Finding", ()),
        ("Fever", "Finding", ()),
    ]:
        ids[name] = g.add_node(ntype, name, synonyms=syns)
    for src, dst, etype in [
        ("Aspirin", "headache", "TREAT"),
        ("Aspirin", "nausea", "CAUSE"),
        ("Metformin", "Diarrhea", "CAUSE"),
        ("Diarrhea", "Fever", "INDICATE"),
        ("nausea", "acute renal failure", "INDICATE"),
        ("nausea", "nephrotoxicity", "INDICATE"),
        ("nausea", "proteinuria", "INDICATE"),
    ]:
        g.add_edge(ids[src], ids[dst], etype)
    g.freeze()
    g.ids = ids
    return g


@pytest.fixture
def toy_index(toy_kb):
    return build_inverted_index(toy_kb)


@pytest.fixture
def daf_metapath():
    return Metapath.parse("Drug-CAUSE-AdverseEffect-INDICATE-Finding")


@pytest.fixture
def arf_snippet():
    text = ("Aspirin can cause nausea indicating a potential ARF, "
            "nephrotoxicity, and proteinuria")
    mentions = tuple(
        Mention(surface, text.index(surface), text.index(surface) + len(surface),
                category=category)
        for surface, category in [
            ("Aspirin", "Drug"), ("nausea", "AdverseEffect"), ("ARF", "Finding"),
            ("nephrotoxicity", "Finding"), ("proteinuria", "Finding")])
    return TextSnippet("fig3", text, mentions)


@pytest.fixture
def toy_store(toy_kb):
    vocab = {tok for n in toy_kb.nodes() for tok in n.name}
    return random_word_vectors(vocab, 16, seed=7)


@pytest.fixture
def toy_freqs(toy_kb):
    return FrequencyTable.from_graph(toy_kb)


def random_hetero_graph(rng, n_nodes=20, n_types=3, n_edge_types=3,
                        edge_prob=0.15, max_degree=None):
    """Random typed graph for property tests; returns a frozen HeteroGraph."""
    g = HeteroGraph()
    types = [f"T{i}" for i in range(n_types)]
    for i in range(n_nodes):
        g.add_node(types[int(rng.integers(n_types))], f"node {i}")
    etypes = [f"R{i}" for i in range(n_edge_types)]
    degree = {i: 0 for i in range(n_nodes)}
    for u in range(n_nodes):
        for v in range(n_nodes):
            if u == v or rng.random() >= edge_prob:
                continue
            if max_degree is not None and (degree[u] >= max_degree
                                           or degree[v] >= max_degree):
                continue
            g.add_edge(u, v, etypes[int(rng.integers(n_edge_types))])
            degree[u] += 1
            degree[v] += 1
    g.freeze()
    return g

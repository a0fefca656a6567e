"""Build and semantically augment per-snippet query graphs.

Mentions are extracted by a pluggable extractor (a gazetteer over the KB's
inverted index by default, or a passthrough over gold annotations), matched
against the KB, and wired together with KB-typed edges.  Unmatched mentions
are connected through schema-compatible edge types.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .hetgraph import (SELF_EDGE_TYPE, RELATED_EDGE_TYPE, GraphError,
                       HeteroGraph, InvertedIndex, normalize)
from .termembed import FrequencyTable, SifConfig, WordVectorStore, term_embedding


class QueryGraphError(Exception):
    pass


@dataclass(frozen=True)
class Mention:
    surface: str
    start_offset: int
    end_offset: int
    category: str | None = None
    link_id: int | str | None = None

    def check_against(self, text: str) -> None:
        if not (0 <= self.start_offset < self.end_offset <= len(text)):
            raise QueryGraphError(f"mention span out of bounds: {self}")
        if text[self.start_offset:self.end_offset] != self.surface:
            raise QueryGraphError(f"mention surface does not equal its span: {self}")


@dataclass(frozen=True)
class TextSnippet:
    id: str
    text: str
    mentions: tuple[Mention, ...] = ()

    def __post_init__(self):
        if not self.text:
            raise QueryGraphError("empty snippet text")
        for m in self.mentions:
            m.check_against(self.text)

    @classmethod
    def from_json(cls, data: dict, snippet_id: str = "s0") -> "TextSnippet":
        mentions = tuple(
            Mention(m["mention"], m["start_offset"], m["end_offset"],
                    m.get("category"), m.get("link_id"))
            for m in data.get("Mentions", []))
        return cls(str(data.get("id", snippet_id)), data["Text"], mentions)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "Text": self.text,
            "Mentions": [
                {"mention": m.surface, "start_offset": m.start_offset,
                 "end_offset": m.end_offset, "category": m.category,
                 "link_id": m.link_id}
                for m in self.mentions
            ],
        }


# -- extractors ------------------------------------------------------------

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


class GazetteerExtractor:
    """Longest-match lookup over the inverted index, plus an all-caps
    heuristic that surfaces unknown abbreviation-like tokens."""

    def __init__(self, index: InvertedIndex, max_tokens: int | None = None,
                 all_caps_unknown: bool = True, min_caps_len: int = 2):
        self.index = index
        self.max_tokens = max_tokens or max(1, index.max_key_tokens())
        self.all_caps_unknown = all_caps_unknown
        self.min_caps_len = min_caps_len

    def __call__(self, snippet: TextSnippet) -> list[Mention]:
        spans = [(m.start(), m.end(), m.group()) for m in _TOKEN_RE.finditer(snippet.text)]
        mentions: list[Mention] = []
        i = 0
        while i < len(spans):
            matched = None
            for width in range(min(self.max_tokens, len(spans) - i), 0, -1):
                start = spans[i][0]
                end = spans[i + width - 1][1]
                surface = snippet.text[start:end]
                if self.index.lookup(surface):
                    matched = (surface, start, end, width)
                    break
            if matched:
                surface, start, end, width = matched
                mentions.append(Mention(surface, start, end))
                i += width
                continue
            start, end, tok = spans[i]
            if (self.all_caps_unknown and tok.isupper() and tok.isalpha()
                    and len(tok) >= self.min_caps_len):
                mentions.append(Mention(tok, start, end))
            i += 1
        return mentions


class GoldMentionExtractor:
    """Reproduce the snippet's annotated mention list verbatim."""

    def __call__(self, snippet: TextSnippet) -> list[Mention]:
        return sorted(snippet.mentions, key=lambda m: m.start_offset)


def extract_mentions(snippet: TextSnippet, extractor) -> list[Mention]:
    """Non-overlapping mentions in left-to-right order."""
    mentions = sorted(extractor(snippet), key=lambda m: (m.start_offset, m.end_offset))
    out: list[Mention] = []
    last_end = 0
    for m in mentions:
        if m.start_offset >= last_end:
            out.append(m)
            last_end = m.end_offset
    return out


def match_mentions(mentions, index: InvertedIndex, graph: HeteroGraph):
    """Split mentions into (matched with candidate ids + types, unknown)."""
    matched: list[tuple[Mention, frozenset[int], tuple[str, ...]]] = []
    unknown: list[Mention] = []
    for m in mentions:
        candidates = index.lookup(m.surface)
        if candidates:
            types = tuple(sorted({graph.node(c).type for c in candidates}))
            matched.append((m, frozenset(candidates), types))
        else:
            unknown.append(m)
    return matched, unknown


# -- query graph -----------------------------------------------------------

@dataclass
class QueryGraph:
    graph: HeteroGraph
    mentions: dict[int, Mention] = field(default_factory=dict)        # node id -> mention
    matches: dict[int, frozenset[int]] = field(default_factory=dict)  # node id -> KB ids
    inferred_types: dict[int, tuple[str, ...]] = field(default_factory=dict)
    unknown_nodes: tuple[int, ...] = ()

    def node_for_mention(self, surface: str) -> int:
        for nid, m in self.mentions.items():
            if m.surface == surface:
                return nid
        raise QueryGraphError(f"no mention node for {surface!r}")

    def features(self, store: WordVectorStore, freqs: FrequencyTable,
                 cfg: SifConfig = SifConfig()) -> np.ndarray:
        """Surface-string term embeddings, so lexical variants stay distinct."""
        rows = [term_embedding(self.mentions[nid].surface, store, freqs, cfg)
                for nid in self.graph.node_ids]
        return np.stack(rows) if rows else np.zeros((0, store.dim))


def _unknown_types(mention: Mention, kb: HeteroGraph, matched_types: set[str]) -> tuple[str, ...]:
    if mention.category and mention.category in kb.node_types:
        return (mention.category,)
    # No usable category: any KB type the schema can connect to a matched type.
    out = set()
    for t in kb.node_types:
        for (src, _, dst) in kb.schema.edge_types_for(t):
            other = dst if src == t else src
            if other in matched_types:
                out.add(t)
    return tuple(sorted(out))


def augment_query_graph(kb: HeteroGraph, index: InvertedIndex,
                        snippet: TextSnippet, extractor) -> QueryGraph:
    """Query graph with KB-derived typed edges and self-loops everywhere."""
    if not kb.frozen:
        raise QueryGraphError("KB must be frozen")
    mentions = extract_mentions(snippet, extractor)
    matched, unknown = match_mentions(mentions, index, kb)

    g = HeteroGraph()
    qg = QueryGraph(g)
    matched_info: list[tuple[int, frozenset[int], tuple[str, ...]]] = []

    for mention, candidates, types in matched:
        nid = g.add_node(types[0], mention.surface or "?")
        qg.mentions[nid] = mention
        qg.matches[nid] = candidates
        qg.inferred_types[nid] = types
        matched_info.append((nid, candidates, types))

    # KB-edge transfer between matched pairs (any candidate pair connected).
    added: set[tuple[int, int, str]] = set()
    for i, (u_q, u_cands, _) in enumerate(matched_info):
        for v_q, v_cands, _ in matched_info[i + 1:]:
            for e in kb.edges:
                if e.type == SELF_EDGE_TYPE:
                    continue
                if e.src in u_cands and e.dst in v_cands:
                    added.add((u_q, v_q, e.type))
                elif e.src in v_cands and e.dst in u_cands:
                    added.add((v_q, u_q, e.type))

    # Unknown mentions: infer types, connect via schema-compatible edge types.
    matched_types = {t for _, _, types in matched_info for t in types}
    unknown_ids: list[int] = []
    for mention in unknown:
        types = _unknown_types(mention, kb, matched_types)
        if not types:
            types = tuple(sorted(kb.node_types))
        nid = g.add_node(types[0], mention.surface or "?")
        qg.mentions[nid] = mention
        qg.matches[nid] = frozenset()
        qg.inferred_types[nid] = types
        unknown_ids.append(nid)
        for v_q in sorted(qg.mentions):
            if v_q == nid:
                continue
            for t_u in types:
                for t_v in qg.inferred_types[v_q]:
                    for (src, etype, dst) in kb.schema.connecting(t_u, t_v):
                        if src == t_v and dst == t_u:
                            added.add((v_q, nid, etype))
                        if src == t_u and dst == t_v:
                            added.add((nid, v_q, etype))

    for src, dst, etype in sorted(added):
        g.add_edge(src, dst, etype)
    for nid in sorted(qg.mentions):
        g.add_edge(nid, nid, SELF_EDGE_TYPE)
    g.freeze()
    qg.unknown_nodes = tuple(unknown_ids)
    return qg


def fully_connected_query_graph(kb: HeteroGraph, index: InvertedIndex,
                                snippet: TextSnippet, extractor) -> QueryGraph:
    """Untyped baseline: every mention pair connected by a generic edge."""
    mentions = extract_mentions(snippet, extractor)
    matched, unknown = match_mentions(mentions, index, kb)
    g = HeteroGraph()
    qg = QueryGraph(g)
    for mention, candidates, types in matched:
        nid = g.add_node(types[0], mention.surface or "?")
        qg.mentions[nid] = mention
        qg.matches[nid] = candidates
        qg.inferred_types[nid] = types
    unknown_ids = []
    matched_types = {t for nid in qg.mentions for t in qg.inferred_types[nid]}
    for mention in unknown:
        types = _unknown_types(mention, kb, matched_types) or tuple(sorted(kb.node_types))
        nid = g.add_node(types[0], mention.surface or "?")
        qg.mentions[nid] = mention
        qg.matches[nid] = frozenset()
        qg.inferred_types[nid] = types
        unknown_ids.append(nid)
    ids = sorted(qg.mentions)
    for i, u in enumerate(ids):
        for v in ids[i + 1:]:
            g.add_edge(u, v, RELATED_EDGE_TYPE)
            g.add_edge(v, u, RELATED_EDGE_TYPE)
    for nid in ids:
        g.add_edge(nid, nid, SELF_EDGE_TYPE)
    g.freeze()
    qg.unknown_nodes = tuple(unknown_ids)
    return qg

"""Dataset splitting, metrics, and a synthetic medical-style corpus.

The generator builds a typed KB over an invented vocabulary following the
Drug / AdverseEffect / Symptom / Finding schema, then emits text snippets
each containing one ambiguous (corrupted-surface) mention plus a few
unambiguous context mentions drawn from the gold node's KB neighbors.
Everything is a pure function of the config, seed included.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import matcher as matcher_mod
from .hetgraph import (HeteroGraph, InvertedIndex, Metapath, Schema,
                       SELF_EDGE_TYPE, build_inverted_index, tokenize)
from .matcher import (MatchingHead, SiameseModel, TrainConfig, TrainItem,
                      build_query_batch, candidate_ids)
from .encoders import Encoder, EncoderConfig
from .querygraph import (GoldMentionExtractor, Mention, TextSnippet,
                         augment_query_graph, fully_connected_query_graph)
from .termembed import (FrequencyTable, SifConfig, WordVectorStore,
                        init_node_features, random_word_vectors, term_embedding)


class EvalGenError(Exception):
    pass


# -- splits ----------------------------------------------------------------

@dataclass(frozen=True)
class Split:
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]
    ratios: tuple[float, float, float]
    seed: int


def split_dataset(snippet_ids, ratios=(0.70, 0.15, 0.15), seed: int = 0) -> Split:
    """Seeded shuffle then partition; deterministic for a given seed."""
    ids = list(snippet_ids)
    if len(ids) < 3:
        raise EvalGenError("need at least 3 snippets to split")
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise EvalGenError(f"degenerate split ratios {ratios}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n_train = int(round(ratios[0] * len(ids)))
    n_val = int(round(ratios[1] * len(ids)))
    n_train = min(n_train, len(ids) - 2)
    n_val = max(1, min(n_val, len(ids) - n_train - 1))
    return Split(tuple(shuffled[:n_train]),
                 tuple(shuffled[n_train:n_train + n_val]),
                 tuple(shuffled[n_train + n_val:]),
                 tuple(ratios), seed)


# -- metrics ---------------------------------------------------------------

@dataclass
class ErrorContext:
    gold_type: str
    inferred_types: tuple[str, ...]
    mention_degree: int                # non-self edges incident to the mention


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    n_gold: int
    n_emitted: int
    n_correct: int
    error_counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "n_gold": self.n_gold, "n_emitted": self.n_emitted,
                "n_correct": self.n_correct, "errors": dict(self.error_counts)}


def _attribute_error(ctx: ErrorContext) -> str:
    if ctx.gold_type not in ctx.inferred_types:
        return "construction"
    if ctx.mention_degree <= 1:
        return "insufficient-structure"
    return "similar-nodes"


def precision_recall_f1(predictions: dict, gold: dict,
                        error_contexts: dict | None = None) -> EvalReport:
    """Rank-1 scoring: a prediction is correct iff its top candidate is gold.

    `predictions` maps mention key -> ranked candidate id list (may be empty);
    `gold` maps mention key -> the single gold node id.
    """
    unknown = set(predictions) - set(gold)
    if unknown:
        raise EvalGenError(f"predictions for unknown mentions: {sorted(unknown)[:3]}")
    emitted = {k: v for k, v in predictions.items() if v}
    correct = sum(1 for k, v in emitted.items() if v[0] == gold[k])
    precision = correct / len(emitted) if emitted else 0.0
    recall = correct / len(gold) if gold else 0.0
    f1 = (2 * precision * recall / (precision + recall)) if precision + recall else 0.0
    errors: dict[str, int] = {"construction": 0, "insufficient-structure": 0,
                              "similar-nodes": 0}
    if error_contexts:
        for key in gold:
            ranked = predictions.get(key) or []
            if ranked and ranked[0] == gold[key]:
                continue
            if key in error_contexts:
                errors[_attribute_error(error_contexts[key])] += 1
    return EvalReport(precision, recall, f1, len(gold), len(emitted), correct, errors)


# -- synthetic corpus ------------------------------------------------------

DEFAULT_NODE_COUNTS = {"Drug": 150, "AdverseEffect": 200, "Symptom": 150, "Finding": 400}
DEFAULT_TRIPLES = (
    ("Drug", "TREAT", "Symptom", 2),
    ("Drug", "CAUSE", "AdverseEffect", 3),
    ("AdverseEffect", "INDICATE", "Finding", 2),
    ("Symptom", "HAS", "Finding", 2),
    ("Finding", "ASSOC", "Finding", 2),
)
DEFAULT_AMBIGUITY_MIX = {"acronym": 0.18, "abbreviation": 0.10, "synonym": 0.17,
                         "simplification": 0.14, "typo": 0.11, "twin": 0.30}


@dataclass
class SynthConfig:
    node_counts: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_NODE_COUNTS))
    triples: tuple = DEFAULT_TRIPLES
    vocab_size: int = 600
    name_tokens: tuple[int, int] = (2, 3)
    synonym_fraction: float = 0.15
    ambiguity_mix: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_AMBIGUITY_MIX))
    snippets: int = 300
    context_mentions: tuple[int, int] = (2, 4)
    two_hop_fraction: float = 0.3       # share of context drawn from 2-hop neighbors
    twin_fraction: float = 0.4          # share of Findings created as lookalike pairs
    feature_dim: int = 128
    max_retries: int = 50
    seed: int = 0

    def validate(self) -> None:
        if abs(sum(self.ambiguity_mix.values()) - 1.0) > 1e-9:
            raise EvalGenError("ambiguity mix probabilities must sum to 1")
        if not 0.0 <= self.twin_fraction <= 1.0:
            raise EvalGenError("twin_fraction must be in [0, 1]")
        if self.ambiguity_mix.get("twin", 0.0) > 0.0 and (
                self.twin_fraction <= 0.0 or self.node_counts.get("Finding", 0) < 2):
            raise EvalGenError("twin ambiguity needs twin_fraction > 0 and >= 2 Findings")
        if any(c <= 0 for c in self.node_counts.values()):
            raise EvalGenError("node counts must be positive")
        for src, _, dst, deg in self.triples:
            limit = self.node_counts.get(dst, 0)
            if src == dst:
                limit -= 1
            if deg > limit:
                raise EvalGenError(f"unsatisfiable density: {deg} out-edges to {dst}")

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        data = dict(data)
        if "triples" in data:
            data["triples"] = tuple(tuple(t) for t in data["triples"])
        for key in ("name_tokens", "context_mentions"):
            if key in data:
                data[key] = tuple(data[key])
        cfg = cls(**data)
        cfg.validate()
        return cfg


@dataclass
class SynthCorpus:
    kb: HeteroGraph
    index: InvertedIndex      # long forms + registered synonyms, no acronyms
    snippets: list[TextSnippet]
    store: WordVectorStore
    freqs: FrequencyTable
    config: SynthConfig

    def snippet(self, sid: str) -> TextSnippet:
        for s in self.snippets:
            if s.id == sid:
                return s
        raise EvalGenError(f"unknown snippet {sid!r}")

    def ambiguous_mention(self, snippet: TextSnippet) -> Mention:
        for m in snippet.mentions:
            if not self.index.lookup(m.surface):
                return m
        raise EvalGenError(f"snippet {snippet.id} has no ambiguous mention")

    def save(self, outdir) -> None:
        import os
        from .hetgraph import save_graph
        os.makedirs(outdir, exist_ok=True)
        save_graph(self.kb, os.path.join(outdir, "nodes.tsv"),
                   os.path.join(outdir, "edges.tsv"))
        with open(os.path.join(outdir, "snippets.json"), "w", encoding="utf-8") as fh:
            json.dump([s.to_json() for s in self.snippets], fh, indent=2)
        self.store.save(os.path.join(outdir, "wordvecs.txt"))


_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _make_word(rng: np.random.Generator) -> str:
    n_syll = int(rng.integers(2, 4))
    return "".join(_CONSONANTS[rng.integers(len(_CONSONANTS))]
                   + _VOWELS[rng.integers(len(_VOWELS))]
                   for _ in range(n_syll))


def _corrupt(kind: str, tokens: tuple[str, ...], variants: dict[str, str],
             rng: np.random.Generator) -> str | None:
    if kind == "acronym":
        if len(tokens) < 2:
            return None
        return "".join(t[0] for t in tokens)
    if kind == "abbreviation":
        cut = [t[:max(2, (len(t) + 1) // 2)] for t in tokens]
        out = " ".join(cut)
        return out if out != " ".join(tokens) else None
    if kind == "synonym":
        i = int(rng.integers(len(tokens)))
        repl = variants.get(tokens[i])
        if repl is None:
            return None
        return " ".join(tokens[:i] + (repl,) + tokens[i + 1:])
    if kind == "simplification":
        if len(tokens) < 2:
            return None
        i = int(rng.integers(len(tokens)))
        return " ".join(tokens[:i] + tokens[i + 1:])
    if kind == "twin":
        # the lookalike pair "shared d1" / "shared d2" collapses to "shared";
        # only KB structure can break the tie
        if len(tokens) < 2:
            return None
        return tokens[0]
    if kind == "typo":
        i = int(rng.integers(len(tokens)))
        tok = tokens[i]
        j = int(rng.integers(len(tok)))
        alphabet = _CONSONANTS + _VOWELS
        repl = alphabet[int(rng.integers(len(alphabet)))]
        if repl == tok[j]:
            repl = alphabet[(alphabet.index(repl) + 1) % len(alphabet)]
        return " ".join(tokens[:i] + (tok[:j] + repl + tok[j + 1:],) + tokens[i + 1:])
    raise EvalGenError(f"unknown corruption kind {kind!r}")


_FILLERS = ("the chart mentions", "alongside", "with recurrent", "suggesting",
            "followed by", "and also", "consistent with", "noted during review of")


def generate_synthetic_kb(config: SynthConfig) -> SynthCorpus:
    """Deterministic KB + snippet corpus; see the module docstring."""
    config.validate()
    rng = np.random.default_rng(config.seed)

    vocab: list[str] = []
    seen = set()
    while len(vocab) < config.vocab_size:
        w = _make_word(rng)
        if w not in seen:
            seen.add(w)
            vocab.append(w)
    variants: dict[str, str] = {}
    for w in vocab:
        v = _make_word(rng)
        while v in seen:
            v = _make_word(rng)
        seen.add(v)
        variants[w] = v

    kb = HeteroGraph()
    used_surfaces: set[str] = set()
    lo, hi = config.name_tokens
    twin_of: dict[int, int] = {}
    for ntype in sorted(config.node_counts):
        count = config.node_counts[ntype]
        if ntype == "Finding":
            # lookalike pairs: same first token, one distinguishing token
            n_pairs = int(count * config.twin_fraction) // 2
            for _ in range(n_pairs):
                for _attempt in range(config.max_retries):
                    shared = vocab[int(rng.integers(len(vocab)))]
                    d1 = vocab[int(rng.integers(len(vocab)))]
                    d2 = vocab[int(rng.integers(len(vocab)))]
                    s1, s2 = f"{shared} {d1}", f"{shared} {d2}"
                    if d1 != d2 and s1 not in used_surfaces and s2 not in used_surfaces:
                        break
                else:
                    raise EvalGenError("could not draw a fresh twin pair")
                used_surfaces.update((s1, s2))
                a = kb.add_node(ntype, s1)
                b = kb.add_node(ntype, s2)
                twin_of[a], twin_of[b] = b, a
            count -= 2 * n_pairs
        for _ in range(count):
            for _attempt in range(config.max_retries):
                n_tok = int(rng.integers(lo, hi + 1))
                toks = tuple(vocab[int(rng.integers(len(vocab)))] for _ in range(n_tok))
                surface = " ".join(toks)
                if surface not in used_surfaces:
                    break
            else:
                raise EvalGenError("could not draw a fresh node name; vocab too small")
            used_surfaces.add(surface)
            synonyms = []
            if len(toks) >= 2 and rng.random() < config.synonym_fraction:
                i = int(rng.integers(len(toks)))
                syn = " ".join(toks[:i] + (variants[toks[i]],) + toks[i + 1:])
                if syn not in used_surfaces:
                    used_surfaces.add(syn)
                    synonyms.append(syn)
            kb.add_node(ntype, surface, synonyms=synonyms)

    by_type = {t: [n.id for n in kb.nodes() if n.type == t] for t in config.node_counts}
    for src_t, etype, dst_t, deg in config.triples:
        for src in by_type[src_t]:
            # a twin is always its lookalike's 1-hop neighbor, so the hard
            # sampler can surface it as a difficult negative
            forced = ([twin_of[src]] if src_t == dst_t == "Finding"
                      and src in twin_of else [])
            choices = [n for n in by_type[dst_t] if n != src and n not in forced]
            picks = rng.choice(len(choices), size=deg - len(forced), replace=False)
            for dst in forced + [choices[i] for i in sorted(picks)]:
                kb.add_edge(src, dst, etype)
    kb.freeze()
    index = build_inverted_index(kb, acronym_rule=None)

    kinds = sorted(config.ambiguity_mix)
    probs = np.array([config.ambiguity_mix[k] for k in kinds])
    gold_pool = [n for n in by_type["Finding"] if len(kb.neighbors(n)) >= 2]
    if not gold_pool:
        raise EvalGenError("no Finding node has enough neighbors for snippets")
    twin_pool = [n for n in gold_pool if n in twin_of]

    snippets: list[TextSnippet] = []
    for s_i in range(config.snippets):
        for _attempt in range(config.max_retries):
            kind = kinds[int(rng.choice(len(kinds), p=probs))]
            pool = twin_pool if kind == "twin" else gold_pool
            if not pool:
                continue
            gold = pool[int(rng.integers(len(pool)))]
            gold_node = kb.node(gold)
            corrupted = _corrupt(kind, gold_node.name, variants, rng)
            if corrupted and not index.lookup(corrupted):
                break
        else:
            raise EvalGenError("exhausted retries generating an ambiguous mention")

        neighbors = sorted(kb.neighbors(gold) - {gold})
        two_hop = sorted({w for u in neighbors for w in kb.neighbors(u)}
                         - set(neighbors) - {gold})
        c_lo, c_hi = config.context_mentions
        n_ctx = min(len(neighbors), int(rng.integers(c_lo, c_hi + 1)))
        picks = rng.choice(len(neighbors), size=n_ctx, replace=False)
        ctx_nodes = [neighbors[i] for i in sorted(picks)]
        # some context only reaches the gold node at 2 hops, so deeper
        # encoders see strictly more corroborating structure; snippets whose
        # context is entirely 2-hop are unresolvable for a 1-layer encoder
        if two_hop:
            for j in range(len(ctx_nodes)):
                if rng.random() < config.two_hop_fraction:
                    ctx_nodes[j] = two_hop[int(rng.integers(len(two_hop)))]

        entries = [(kb.node(c).surface, kb.node(c).type, c) for c in ctx_nodes]
        entries.insert(int(rng.integers(len(entries) + 1)),
                       (corrupted, gold_node.type, gold))
        text_parts: list[str] = []
        mentions: list[Mention] = []
        cursor = 0
        for surface, category, link in entries:
            filler = _FILLERS[int(rng.integers(len(_FILLERS)))]
            prefix = (filler + " ") if text_parts else (filler.capitalize() + " ")
            text_parts.append(prefix)
            cursor += len(prefix)
            text_parts.append(surface)
            mentions.append(Mention(surface, cursor, cursor + len(surface),
                                    category=category, link_id=link))
            text_parts.append(" ")
            cursor += len(surface) + 1
        text = "".join(text_parts).rstrip() + "."
        snippets.append(TextSnippet(f"s{s_i:04d}", text, tuple(mentions)))

    all_tokens = [tok for s in used_surfaces for tok in s.split()]
    store = random_word_vectors(set(all_tokens) | set(variants.values()),
                                config.feature_dim, seed=config.seed)
    freqs = FrequencyTable.from_corpus([s.split() for s in used_surfaces])
    return SynthCorpus(kb, index, snippets, store, freqs, config)


# -- pipeline helpers ------------------------------------------------------

def schema_metapaths(schema: Schema, max_edges: int = 2, limit: int = 8) -> list[Metapath]:
    """Deterministic metapath inventory: all single triples plus two-edge
    chains, SELF excluded, truncated to `limit`."""
    triples = sorted(t for t in schema.triples if t[1] != SELF_EDGE_TYPE)
    paths = [Metapath((s, d), (e,)) for s, e, d in triples]
    if max_edges >= 2:
        for s1, e1, d1 in triples:
            for s2, e2, d2 in triples:
                if d1 == s2:
                    paths.append(Metapath((s1, d1, d2), (e1, e2)))
    return paths[:limit] if limit else paths


def kb_features(corpus: SynthCorpus) -> np.ndarray:
    return init_node_features(corpus.kb, corpus.store, corpus.freqs)


def corpus_items(corpus: SynthCorpus, snippet_ids, query_builder: str = "augmented",
                 sif: SifConfig = SifConfig()) -> list[TrainItem]:
    """TrainItems for the given snippets; the ambiguous mention is the one
    with no inverted-index match."""
    build = {"augmented": augment_query_graph,
             "fc": fully_connected_query_graph}[query_builder]
    extractor = GoldMentionExtractor()
    items = []
    for sid in snippet_ids:
        snippet = corpus.snippet(sid)
        qg = build(corpus.kb, corpus.index, snippet, extractor)
        if len(qg.unknown_nodes) != 1:
            raise EvalGenError(
                f"snippet {sid}: expected exactly 1 ambiguous mention, "
                f"got {len(qg.unknown_nodes)}")
        mention_node = qg.unknown_nodes[0]
        mention = qg.mentions[mention_node]
        feats = qg.features(corpus.store, corpus.freqs, sif)
        items.append(TrainItem(sid, qg, feats, mention_node,
                               gold=int(mention.link_id), category=mention.category))
    return items


def make_model(corpus: SynthCorpus, kind: str, seed: int = 0, num_layers: int = 2,
               dim: int = 128, heads: int = 2, dropout: float = 0.5,
               head: str = "dot", metapaths=None, fc_mode: bool = False,
               identity_residual: bool = True) -> SiameseModel:
    from .hetgraph import RELATED_EDGE_TYPE
    if metapaths is None and kind == "magnn":
        metapaths = schema_metapaths(corpus.kb.schema)
    cfg = EncoderConfig(kind=kind, num_layers=num_layers, dim=dim, heads=heads,
                        dropout=dropout, metapaths=metapaths or [], seed=seed,
                        identity_residual=identity_residual)
    edge_types = set(corpus.kb.edge_types) | {SELF_EDGE_TYPE}
    if fc_mode:
        edge_types.add(RELATED_EDGE_TYPE)
    encoder = Encoder(cfg, corpus.store.dim, corpus.kb.node_types, edge_types)
    return SiameseModel(encoder, MatchingHead(head, dim, seed=seed))


def lexical_candidates(kb: HeteroGraph, item: TrainItem) -> list[int]:
    """Candidate generation by token overlap with the mention surface.

    Mirrors how a disambiguation pipeline narrows the KB before ranking:
    type-compatible nodes sharing at least one name/synonym token with the
    mention.  Falls back to the full type-compatible set when nothing
    overlaps (heavily corrupted surfaces)."""
    mention = item.qgraph.mentions[item.mention_node]
    toks = set(tokenize(mention.surface))
    cands = []
    for c in candidate_ids(kb, item):
        node = kb.node(c)
        surface_toks = set(node.name)
        for syn in node.synonyms:
            surface_toks.update(syn)
        if toks & surface_toks:
            cands.append(c)
    return cands or candidate_ids(kb, item)


def predict_batch(model: SiameseModel, kb: HeteroGraph, kb_feats: np.ndarray,
                  items: list[TrainItem],
                  candidates: str = "type") -> dict[str, list[int]]:
    """Ranked candidate ids per snippet id, one shared KB encoding.

    `candidates` picks the pool each mention is ranked against: "type" uses
    every type-compatible KB node, "lexical" narrows to token overlap."""
    if candidates not in ("type", "lexical"):
        raise EvalGenError(f"unknown candidate mode {candidates!r}")
    batch = build_query_batch(items, model.encoder.feature_dim)
    kb_pos = {nid: i for i, nid in enumerate(kb.node_ids)}
    kb_emb = model.encoder.encode(kb, kb_feats).data
    q_emb = model.encoder.encode(batch.graph, batch.features).data
    out: dict[str, list[int]] = {}
    for item, mid in zip(items, batch.mention_ids):
        cands = (lexical_candidates(kb, item) if candidates == "lexical"
                 else candidate_ids(kb, item))
        pos = np.array([kb_pos[c] for c in cands], dtype=np.int64)
        scores = model.head.score_one_vs_many(q_emb[mid], kb_emb[pos])
        order = sorted(range(len(cands)), key=lambda i: (-scores[i], cands[i]))
        out[item.snippet_id] = [cands[i] for i in order]
    return out


def evaluate_model(model: SiameseModel, corpus: SynthCorpus, items: list[TrainItem],
                   kb_feats: np.ndarray | None = None,
                   candidates: str = "type") -> EvalReport:
    if kb_feats is None:
        kb_feats = kb_features(corpus)
    predictions = predict_batch(model, corpus.kb, kb_feats, items, candidates)
    gold = {it.snippet_id: it.gold for it in items}
    contexts = {}
    for it in items:
        degree = sum(1 for e in it.qgraph.graph.edges
                     if e.type != SELF_EDGE_TYPE and it.mention_node in (e.src, e.dst))
        contexts[it.snippet_id] = ErrorContext(
            corpus.kb.node(it.gold).type,
            it.qgraph.inferred_types.get(it.mention_node, ()), degree)
    return precision_recall_f1(predictions, gold, contexts)


def text_baseline_predictions(corpus: SynthCorpus, items: list[TrainItem],
                              kb_feats: np.ndarray | None = None) -> dict[str, list[int]]:
    """Term-embedding nearest neighbor on the mention surface alone."""
    if kb_feats is None:
        kb_feats = kb_features(corpus)
    kb_pos = {nid: i for i, nid in enumerate(corpus.kb.node_ids)}
    out = {}
    for it in items:
        mention = it.qgraph.mentions[it.mention_node]
        vec = term_embedding(mention.surface, corpus.store, corpus.freqs)
        cands = candidate_ids(corpus.kb, it)
        mat = kb_feats[[kb_pos[c] for c in cands]]
        norms = np.linalg.norm(mat, axis=1) * (np.linalg.norm(vec) or 1.0)
        norms[norms == 0] = 1.0
        scores = mat @ vec / norms
        order = sorted(range(len(cands)), key=lambda i: (-scores[i], cands[i]))
        out[it.snippet_id] = [cands[i] for i in order]
    return out


def evaluate_text_baseline(corpus: SynthCorpus, items: list[TrainItem]) -> EvalReport:
    predictions = text_baseline_predictions(corpus, items)
    gold = {it.snippet_id: it.gold for it in items}
    return precision_recall_f1(predictions, gold)


# -- benchmark -------------------------------------------------------------

@dataclass
class BenchmarkRow:
    encoder: str
    sampler: str
    precision: float
    recall: float
    f1: float
    repetitions: int

    def to_dict(self) -> dict:
        return {"encoder": self.encoder, "sampler": self.sampler,
                "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "repetitions": self.repetitions}


def run_benchmark(corpus: SynthCorpus, encoder_kinds, sampler_kinds,
                  train_config: TrainConfig, repetitions: int = 5,
                  split_seed: int = 0, model_kwargs: dict | None = None) -> list[BenchmarkRow]:
    """Train each (encoder, sampler) cell on shared splits/seeds and average."""
    model_kwargs = dict(model_kwargs or {})
    split = split_dataset([s.id for s in corpus.snippets], seed=split_seed)
    kb_feats = kb_features(corpus)
    train_items = corpus_items(corpus, split.train)
    val_items = corpus_items(corpus, split.validation)
    test_items = corpus_items(corpus, split.test)
    rows = []
    for kind in encoder_kinds:
        for sampler in sampler_kinds:
            reports = []
            for rep in range(repetitions):
                seed = train_config.seed + rep
                model = make_model(corpus, kind, seed=seed, **model_kwargs)
                cfg = TrainConfig(**{**train_config.__dict__,
                                     "seed": seed, "sampler": sampler})
                matcher_mod.train(model, corpus.kb, kb_feats, train_items,
                                  val_items, cfg)
                reports.append(evaluate_model(model, corpus, test_items, kb_feats))
            rows.append(BenchmarkRow(
                kind, sampler,
                float(np.mean([r.precision for r in reports])),
                float(np.mean([r.recall for r in reports])),
                float(np.mean([r.f1 for r in reports])),
                repetitions))
    return rows


def write_benchmark(rows: list[BenchmarkRow], tsv_path=None, json_path=None) -> None:
    if tsv_path:
        with open(tsv_path, "w", encoding="utf-8") as fh:
            fh.write("encoder\tsampler\tprecision\trecall\tf1\trepetitions\n")
            for r in rows:
                fh.write(f"{r.encoder}\t{r.sampler}\t{r.precision:.4f}\t"
                         f"{r.recall:.4f}\t{r.f1:.4f}\t{r.repetitions}\n")
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump([r.to_dict() for r in rows], fh, indent=2)

"""Command line entry point.

Subcommands: ingest (TSV -> KB bundle), gen-synth (synthetic corpus),
train, eval, disambiguate.  Config may come from a JSON file (--config)
with flags overriding it; unknown config keys are rejected.  Set the
HETLINK_LOG environment variable to change verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import evalgen, matcher
from .encoders import ENCODER_KINDS, Encoder, EncoderConfig
from .hetgraph import (HeteroGraph, SELF_EDGE_TYPE, build_inverted_index,
                       load_graph, load_metapaths, save_graph)
from .matcher import (MatchingHead, SiameseModel, TrainConfig, load_model,
                      save_model)
from .querygraph import (GazetteerExtractor, GoldMentionExtractor, TextSnippet,
                         augment_query_graph)
from .termembed import (FrequencyTable, WordVectorStore, init_node_features,
                        load_word_vectors, random_word_vectors)

log = logging.getLogger("hetlink")

BUNDLE_VERSION = "1"

CONFIG_KEYS = {"encoder", "layers", "dim", "heads", "dropout", "lr",
               "weight_decay", "epochs", "patience", "sampler", "curriculum",
               "negatives_per_positive", "seed", "metapaths"}


class CliError(Exception):
    pass


def _load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise CliError("config file must hold a JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    return data


def _merged_options(args) -> dict:
    opts = _load_config(args.config) if args.config else {}
    for key in CONFIG_KEYS - {"metapaths"}:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    opts.setdefault("encoder", "graphsage")
    opts.setdefault("layers", 2)
    opts.setdefault("dim", 64)
    opts.setdefault("heads", 2)
    opts.setdefault("dropout", 0.5)
    opts.setdefault("seed", 0)
    return opts


# -- KB bundle -------------------------------------------------------------

def write_bundle(outdir, kb: HeteroGraph, store: WordVectorStore,
                 freqs: FrequencyTable) -> None:
    os.makedirs(outdir, exist_ok=True)
    save_graph(kb, os.path.join(outdir, "nodes.tsv"),
               os.path.join(outdir, "edges.tsv"))
    store.save(os.path.join(outdir, "wordvecs.txt"))
    freqs.save_tsv(os.path.join(outdir, "freqs.tsv"))
    with open(os.path.join(outdir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump({"bundle_version": BUNDLE_VERSION, "nodes": len(kb),
                   "edges": len(kb.edges)}, fh, indent=2)


def read_bundle(bundle_dir):
    manifest_path = os.path.join(bundle_dir, "manifest.json")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("bundle_version") != BUNDLE_VERSION:
        raise CliError(f"unsupported bundle version {manifest.get('bundle_version')!r}")
    kb = load_graph(os.path.join(bundle_dir, "nodes.tsv"),
                    os.path.join(bundle_dir, "edges.tsv"))
    store = load_word_vectors(os.path.join(bundle_dir, "wordvecs.txt"))
    freqs = FrequencyTable.load_tsv(os.path.join(bundle_dir, "freqs.tsv"))
    return kb, store, freqs


def _load_snippets(path) -> list[TextSnippet]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = [data]
    return [TextSnippet.from_json(d, snippet_id=d.get("Id", f"s{i:04d}"))
            for i, d in enumerate(data)]


def _build_model(kb: HeteroGraph, feature_dim: int, opts: dict) -> SiameseModel:
    metapaths = []
    if opts.get("metapaths"):
        from .hetgraph import Metapath
        metapaths = [Metapath.parse(m) for m in opts["metapaths"]]
    elif opts["encoder"] == "magnn":
        metapaths = evalgen.schema_metapaths(kb.schema)
    cfg = EncoderConfig(kind=opts["encoder"], num_layers=int(opts["layers"]),
                        dim=int(opts["dim"]), heads=int(opts["heads"]),
                        dropout=float(opts["dropout"]), metapaths=metapaths,
                        seed=int(opts["seed"]))
    encoder = Encoder(cfg, feature_dim, kb.node_types,
                      set(kb.edge_types) | {SELF_EDGE_TYPE})
    return SiameseModel(encoder, MatchingHead("dot", cfg.dim, seed=cfg.seed))


def _train_config(opts: dict) -> TrainConfig:
    cfg = TrainConfig(seed=int(opts["seed"]))
    for key in ("epochs", "patience", "negatives_per_positive"):
        if key in opts:
            setattr(cfg, key, int(opts[key]))
    for key in ("lr", "weight_decay"):
        if key in opts:
            setattr(cfg, key, float(opts[key]))
    if "sampler" in opts:
        cfg.sampler = opts["sampler"]
    if "curriculum" in opts:
        cfg.curriculum = bool(opts["curriculum"])
    cfg.validate()
    return cfg


def _snippet_items(kb, index, store, freqs, snippets, gold_required: bool):
    gazetteer = GazetteerExtractor(index)
    gold_extractor = GoldMentionExtractor()
    items = []
    for snippet in snippets:
        extractor = gold_extractor if snippet.mentions else gazetteer
        qg = augment_query_graph(kb, index, snippet, extractor)
        if not qg.unknown_nodes:
            log.warning("snippet %s has no ambiguous mention; skipped", snippet.id)
            continue
        mention_node = qg.unknown_nodes[0]
        mention = qg.mentions[mention_node]
        gold = mention.link_id
        if gold_required and gold is None:
            raise CliError(f"snippet {snippet.id}: ambiguous mention lacks link_id")
        items.append(matcher.TrainItem(snippet.id, qg, qg.features(store, freqs),
                                       mention_node,
                                       gold=-1 if gold is None else int(gold),
                                       category=mention.category))
    return items


# -- subcommands -----------------------------------------------------------

def cmd_ingest(args) -> int:
    kb = load_graph(args.nodes, args.edges)
    if args.wordvecs:
        store = load_word_vectors(args.wordvecs)
    else:
        vocab = {t for n in kb.nodes() for t in n.name}
        store = random_word_vectors(vocab, args.dim, seed=args.seed or 0)
    freqs = FrequencyTable.from_graph(kb)
    write_bundle(args.out, kb, store, freqs)
    log.info("wrote bundle with %d nodes / %d edges to %s",
             len(kb), len(kb.edges), args.out)
    return 0


def cmd_gen_synth(args) -> int:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = evalgen.SynthConfig.from_dict(json.load(fh))
    else:
        cfg = evalgen.SynthConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.snippets is not None:
        cfg.snippets = args.snippets
    corpus = evalgen.generate_synthetic_kb(cfg)
    corpus.save(args.out)
    write_bundle(args.out, corpus.kb, corpus.store, corpus.freqs)
    log.info("generated %d nodes, %d snippets into %s",
             len(corpus.kb), len(corpus.snippets), args.out)
    return 0


def cmd_train(args) -> int:
    opts = _merged_options(args)
    kb, store, freqs = read_bundle(args.bundle)
    index = build_inverted_index(kb)
    snippets = _load_snippets(args.snippets)
    items = _snippet_items(kb, index, store, freqs, snippets, gold_required=True)
    if not items:
        raise CliError("no trainable snippets found")
    split = evalgen.split_dataset([it.snippet_id for it in items],
                                  seed=int(opts["seed"]))
    by_id = {it.snippet_id: it for it in items}
    kb_feats = init_node_features(kb, store, freqs)
    model = _build_model(kb, store.dim, opts)
    result = matcher.train(model, kb, kb_feats,
                           [by_id[s] for s in split.train],
                           [by_id[s] for s in split.validation],
                           _train_config(opts))
    os.makedirs(args.out, exist_ok=True)
    save_model(model, args.out, train_config=_train_config(opts))
    result.write_history_csv(os.path.join(args.out, "history.csv"))
    log.info("best epoch %d metric %.4f; model saved to %s",
             result.best_epoch, result.best_metric, args.out)
    return 0


def cmd_eval(args) -> int:
    kb, store, freqs = read_bundle(args.bundle)
    index = build_inverted_index(kb)
    model, _ = load_model(args.model)
    snippets = _load_snippets(args.snippets)
    items = _snippet_items(kb, index, store, freqs, snippets, gold_required=True)
    kb_feats = init_node_features(kb, store, freqs)
    predictions = evalgen.predict_batch(model, kb, kb_feats, items)
    gold = {it.snippet_id: it.gold for it in items}
    report = evalgen.precision_recall_f1(predictions, gold)
    json.dump(report.to_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_disambiguate(args) -> int:
    kb, store, freqs = read_bundle(args.bundle)
    index = build_inverted_index(kb)
    model, _ = load_model(args.model)
    snippets = _load_snippets(args.snippets)
    items = _snippet_items(kb, index, store, freqs, snippets, gold_required=False)
    kb_feats = init_node_features(kb, store, freqs)
    out = []
    for item in items:
        ranked = matcher.disambiguate(model, kb, kb_feats, item.qgraph,
                                      item.features, item.mention_node, args.top_k)
        mention = item.qgraph.mentions[item.mention_node]
        out.append({"snippet": item.snippet_id, "mention": mention.surface,
                    "candidates": [{"id": nid, "name": kb.node(nid).surface,
                                    "score": score} for nid, score in ranked]})
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


# -- parser ----------------------------------------------------------------

def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--encoder", choices=ENCODER_KINDS)
    p.add_argument("--layers", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--sampler", choices=("uniform", "hard"))
    p.add_argument("--curriculum", type=lambda s: s.lower() in ("1", "true", "yes"))
    p.add_argument("--negatives-per-positive", dest="negatives_per_positive", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON config file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetlink",
                                     description="Graph-based entity disambiguation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a KB bundle from TSV files")
    p.add_argument("--nodes", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--wordvecs")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("gen-synth", help="generate a synthetic KB + snippet corpus")
    p.add_argument("--config", help="JSON file with generator settings")
    p.add_argument("--seed", type=int)
    p.add_argument("--snippets", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="train a disambiguation model")
    p.add_argument("--bundle", required=True)
    p.add_argument("--snippets", required=True, help="snippet JSON file")
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a trained model on labeled snippets")
    p.add_argument("--bundle", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--snippets", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("disambiguate", help="rank candidates for new snippets")
    p.add_argument("--bundle", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--snippets", required=True)
    p.add_argument("--top-k", dest="top_k", type=int, default=5)
    p.set_defaults(func=cmd_disambiguate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("HETLINK_LOG", "INFO").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # structured error reporting, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

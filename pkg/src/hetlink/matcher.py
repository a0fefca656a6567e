"""Siamese matcher: shared-parameter encoding of KB and query graphs,
matching heads, the pair loss, the training loop, and ranked disambiguation.

Both "towers" are literally the same Encoder object, so weight sharing is
structural rather than a synchronization concern.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import ndiff
from .encoders import Encoder, EncoderConfig
from .hetgraph import HeteroGraph
from .ndiff import Adam, Parameter, Tensor
from .negsample import HardNegativeSampler
from .querygraph import QueryGraph

HEAD_KINDS = ("dot", "mlp1", "bilinear")


class MatcherError(Exception):
    pass


class MatchingHead:
    """Scores a pair of embeddings: dot product, bilinear form, or a
    one-hidden-layer MLP on the concatenation.

    The dot head works on unit-normalized rows with a learnable temperature:
    unbounded logits otherwise let the optimizer memorize training pairs
    instead of learning a transferable similarity.
    """

    def __init__(self, kind: str, dim: int, seed: int = 0, hidden: int | None = None):
        if kind not in HEAD_KINDS:
            raise MatcherError(f"unknown matching head {kind!r}")
        self.kind = kind
        self.dim = dim
        self.hidden = hidden or dim
        self._params: dict[str, Parameter] = {}
        rng = np.random.default_rng(seed)
        if kind == "dot":
            self._params["head.tau"] = Parameter(np.array([10.0]), "head.tau")
        elif kind == "bilinear":
            self._params["head.M"] = Parameter(ndiff.glorot(rng, (dim, dim)), "head.M")
        elif kind == "mlp1":
            self._params["head.W1"] = Parameter(ndiff.glorot(rng, (2 * dim, self.hidden)), "head.W1")
            self._params["head.b1"] = Parameter(np.zeros(self.hidden), "head.b1")
            self._params["head.w2"] = Parameter(ndiff.glorot(rng, (self.hidden, 1)), "head.w2")

    def parameters(self) -> list[Parameter]:
        return [self._params[k] for k in sorted(self._params)]

    def score_pairs(self, h_u: Tensor, h_v: Tensor) -> Tensor:
        """Row-wise logits for aligned (n, d) embedding pairs."""
        if h_u.shape != h_v.shape:
            raise MatcherError(f"embedding shape mismatch {h_u.shape} vs {h_v.shape}")
        if self.kind == "dot":
            cos = ndiff.sum_axis1(ndiff.mul(ndiff.l2_normalize_rows(h_u),
                                            ndiff.l2_normalize_rows(h_v)))
            return ndiff.mul(cos, self._params["head.tau"])
        if self.kind == "bilinear":
            return ndiff.sum_axis1(ndiff.mul(ndiff.matmul(h_u, self._params["head.M"]), h_v))
        cat = ndiff.concat([h_u, h_v], axis=1)
        hid = ndiff.elu(ndiff.add(ndiff.matmul(cat, self._params["head.W1"]),
                                  ndiff.reshape(self._params["head.b1"], (1, -1))))
        return ndiff.reshape(ndiff.matmul(hid, self._params["head.w2"]), (-1,))

    def score_one_vs_many(self, h_u: np.ndarray, h_vs: np.ndarray) -> np.ndarray:
        """Inference-only scoring of one query embedding against candidates."""
        n = h_vs.shape[0]
        hu = Tensor(np.repeat(h_u[None, :], n, axis=0))
        return self.score_pairs(hu, Tensor(h_vs)).data.copy()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for k, p in self._params.items():
            p.data[...] = np.asarray(state[k], dtype=np.float64)


def pair_loss(scores_pos: Tensor, scores_neg: Tensor | None,
              literal_negative_sign: bool = False) -> Tensor:
    """-sum log sigmoid(s_pos) - sum log sigmoid(-s_neg), via softplus.

    With literal_negative_sign=True the negative term uses +s_neg instead
    (the uncorrected printed form, kept for comparison only).
    """
    if scores_pos.data.size == 0:
        raise MatcherError("pair_loss needs at least one positive score")
    loss = ndiff.sum_all(ndiff.softplus(ndiff.neg(scores_pos)))
    if scores_neg is not None and scores_neg.data.size:
        neg_arg = ndiff.neg(scores_neg) if literal_negative_sign else scores_neg
        loss = ndiff.add(loss, ndiff.sum_all(ndiff.softplus(neg_arg)))
    return loss


@dataclass
class SiameseModel:
    encoder: Encoder
    head: MatchingHead

    def parameters(self) -> list[Parameter]:
        return self.encoder.parameters() + self.head.parameters()

    def state_dict(self) -> dict[str, np.ndarray]:
        state = self.encoder.state_dict()
        state.update(self.head.state_dict())
        return state

    def load_state_dict(self, state) -> None:
        self.encoder.load_state_dict({k: v for k, v in state.items()
                                      if not k.startswith("head.")})
        self.head.load_state_dict({k: v for k, v in state.items()
                                   if k.startswith("head.")})


@dataclass
class TrainConfig:
    epochs: int = 100
    patience: int = 30
    lr: float = 1e-3
    weight_decay: float = 1e-3
    negatives_per_positive: int = 5
    sampler: str = "uniform"            # uniform | hard
    curriculum: bool = True
    seed: int = 0
    literal_negative_sign: bool = False

    def validate(self) -> None:
        if self.patience > self.epochs:
            raise MatcherError("patience must be <= epochs")
        if self.sampler not in ("uniform", "hard"):
            raise MatcherError(f"unknown sampler {self.sampler!r}")
        if self.negatives_per_positive < 0:
            raise MatcherError("negatives_per_positive must be >= 0")


@dataclass
class TrainItem:
    """One labeled snippet: its query graph, features, and the gold link."""
    snippet_id: str
    qgraph: QueryGraph
    features: np.ndarray
    mention_node: int
    gold: int
    category: str | None = None


@dataclass
class QueryBatch:
    """Disjoint union of query graphs so one forward covers every snippet."""
    graph: HeteroGraph
    features: np.ndarray
    mention_ids: list[int]              # global node id of each item's mention
    items: list[TrainItem]


def build_query_batch(items: list[TrainItem], feature_dim: int) -> QueryBatch:
    union = HeteroGraph()
    feats = []
    mention_ids = []
    offset = 0
    for item in items:
        g = item.qgraph.graph
        remap = {}
        for node in g.nodes():
            remap[node.id] = union.add_node(node.type, node.name)
        for e in g.edges:
            union.add_edge(remap[e.src], remap[e.dst], e.type)
        feats.append(item.features)
        mention_ids.append(remap[item.mention_node])
        offset += len(g)
    union.freeze()
    features = (np.concatenate(feats, axis=0) if feats
                else np.zeros((0, feature_dim)))
    return QueryBatch(union, features, mention_ids, items)


def candidate_ids(kb: HeteroGraph, item: TrainItem) -> list[int]:
    """Type-compatible KB candidates; all nodes when no type is inferred."""
    types: tuple[str, ...] = ()
    if item.category and item.category in kb.node_types:
        types = (item.category,)
    else:
        types = tuple(t for t in item.qgraph.inferred_types.get(item.mention_node, ())
                      if t in kb.node_types)
    if not types:
        return kb.node_ids
    out: list[int] = []
    for t in types:
        out.extend(kb.nodes_of_type(t))
    return sorted(set(out))


@dataclass
class TrainResult:
    history: list[dict]
    best_epoch: int
    best_metric: float
    best_state: dict[str, np.ndarray]

    def write_history_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=["epoch", "loss", "val_f1"])
            writer.writeheader()
            for row in self.history:
                writer.writerow({"epoch": row["epoch"],
                                 "loss": f"{row['loss']:.12g}",
                                 "val_f1": f"{row['val_f1']:.12g}"})


def _rank1_accuracy(model: SiameseModel, kb: HeteroGraph, kb_emb: np.ndarray,
                    batch: QueryBatch, q_emb: np.ndarray,
                    kb_pos: dict[int, int]) -> float:
    if not batch.items:
        return 0.0
    correct = 0
    for item, mid in zip(batch.items, batch.mention_ids):
        cands = candidate_ids(kb, item)
        pos = _positions_list(kb_pos, cands)
        scores = model.head.score_one_vs_many(q_emb[_row_of(batch, mid)], kb_emb[pos])
        best = min(zip(-scores, cands))[1]
        if best == item.gold:
            correct += 1
    return correct / len(batch.items)


def _positions_list(pos_map, ids):
    return np.array([pos_map[i] for i in ids], dtype=np.int64)


def _row_of(batch: QueryBatch, global_id: int) -> int:
    # union graph node ids are assigned densely in row order
    return global_id


def train(model: SiameseModel, kb: HeteroGraph, kb_features: np.ndarray,
          train_items: list[TrainItem], val_items: list[TrainItem],
          config: TrainConfig,
          hard_sampler: HardNegativeSampler | None = None) -> TrainResult:
    """Full-batch training with curriculum negative scheduling and early
    stopping on validation rank-1 F1 (training loss when no validation set)."""
    config.validate()
    if not train_items:
        raise MatcherError("no training items")
    if config.sampler == "hard" and hard_sampler is None:
        hard_sampler = HardNegativeSampler(kb, kb_features)

    batch = build_query_batch(train_items, model.encoder.feature_dim)
    val_batch = build_query_batch(val_items, model.encoder.feature_dim)
    kb_pos = {nid: i for i, nid in enumerate(kb.node_ids)}
    gold_pos = _positions_list(kb_pos, [it.gold for it in train_items])

    opt = Adam(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    history: list[dict] = []
    best_metric = -np.inf
    best_epoch = -1
    best_state = model.state_dict()

    for epoch in range(config.epochs):
        rng = np.random.default_rng([config.seed, epoch])

        # negatives for this epoch
        neg_q_rows: list[int] = []
        neg_kb_ids: list[int] = []
        use_hard = (config.sampler == "hard"
                    and not (config.curriculum and epoch == 0))
        for i, item in enumerate(train_items):
            k = config.negatives_per_positive
            if k == 0:
                continue
            if use_hard:
                context = frozenset().union(*item.qgraph.matches.values()) \
                    if item.qgraph.matches else frozenset()
                negs, _ = hard_sampler.sample(item.gold, k, rng,
                                              exclude=context - {item.gold})
            else:
                pool = [n for n in kb.node_ids if n != item.gold]
                picks = rng.choice(len(pool), size=min(k, len(pool)), replace=False)
                negs = [pool[j] for j in sorted(picks)]
            neg_q_rows.extend([batch.mention_ids[i]] * len(negs))
            neg_kb_ids.extend(negs)

        # forward
        h_q_all = model.encoder.encode(batch.graph, batch.features,
                                       training=True, rng=rng)
        h_kb_all = model.encoder.encode(kb, kb_features, training=True, rng=rng)
        h_pos_q = ndiff.gather_rows(h_q_all, batch.mention_ids)
        h_pos_kb = ndiff.gather_rows(h_kb_all, gold_pos)
        s_pos = model.head.score_pairs(h_pos_q, h_pos_kb)
        s_neg = None
        if neg_kb_ids:
            h_neg_q = ndiff.gather_rows(h_q_all, neg_q_rows)
            h_neg_kb = ndiff.gather_rows(h_kb_all, _positions_list(kb_pos, neg_kb_ids))
            s_neg = model.head.score_pairs(h_neg_q, h_neg_kb)
        loss = pair_loss(s_pos, s_neg, config.literal_negative_sign)
        loss_value = float(loss.data)
        if not np.isfinite(loss_value):
            raise MatcherError(
                f"non-finite loss {loss_value} at epoch {epoch}; "
                f"pos range [{s_pos.data.min()}, {s_pos.data.max()}]")
        ndiff.backward(loss)
        opt.step()

        # validation metric (eval mode, no dropout)
        q_eval = model.encoder.encode(batch.graph, batch.features).data
        kb_eval = model.encoder.encode(kb, kb_features).data
        if val_batch.items:
            v_eval = model.encoder.encode(val_batch.graph, val_batch.features).data
            metric = _rank1_accuracy(model, kb, kb_eval, val_batch, v_eval, kb_pos)
        else:
            metric = -loss_value
        del q_eval
        history.append({"epoch": epoch, "loss": loss_value, "val_f1": max(metric, 0.0)})

        if metric > best_metric:
            best_metric = metric
            best_epoch = epoch
            best_state = model.state_dict()
        elif epoch - best_epoch >= config.patience:
            break

    model.load_state_dict(best_state)
    return TrainResult(history, best_epoch, best_metric, best_state)


def disambiguate(model: SiameseModel, kb: HeteroGraph, kb_features: np.ndarray,
                 qgraph: QueryGraph, q_features: np.ndarray, mention_node: int,
                 k: int, candidates: list[int] | None = None) -> list[tuple[int, float]]:
    """Top-k (node id, score) for one mention, descending score, ties by id."""
    if mention_node not in qgraph.graph:
        raise MatcherError(f"unknown mention node {mention_node}")
    if k <= 0:
        return []
    if candidates is None:
        item = TrainItem("q", qgraph, q_features, mention_node, gold=-1)
        candidates = candidate_ids(kb, item)
    kb_pos = {nid: i for i, nid in enumerate(kb.node_ids)}
    h_q = model.encoder.encode(qgraph.graph, q_features, targets=[mention_node]).data[0]
    kb_emb = model.encoder.encode(kb, kb_features).data
    pos = _positions_list(kb_pos, candidates)
    scores = model.head.score_one_vs_many(h_q, kb_emb[pos])
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], candidates[i]))
    return [(candidates[i], float(scores[i])) for i in order[:k]]


# -- model persistence -----------------------------------------------------

def save_model(model: SiameseModel, directory, train_config: TrainConfig | None = None,
               extra: dict | None = None) -> None:
    cfg = model.encoder.config
    manifest = {
        "encoder": {
            "kind": cfg.kind, "num_layers": cfg.num_layers, "dim": cfg.dim,
            "heads": cfg.heads, "attn_dim": cfg.attn_dim, "dropout": cfg.dropout,
            "metapaths": [m.label() for m in cfg.metapaths],
            "leaky_slope": cfg.leaky_slope, "seed": cfg.seed,
        },
        "feature_dim": model.encoder.feature_dim,
        "node_types": model.encoder.node_types,
        "edge_types": model.encoder.edge_types,
        "head": model.head.kind,
    }
    if train_config is not None:
        manifest["train"] = {
            "epochs": train_config.epochs, "patience": train_config.patience,
            "lr": train_config.lr, "weight_decay": train_config.weight_decay,
            "negatives_per_positive": train_config.negatives_per_positive,
            "sampler": train_config.sampler, "curriculum": train_config.curriculum,
            "seed": train_config.seed,
        }
    if extra:
        manifest.update(extra)
    ndiff.save_checkpoint(directory, model.state_dict(), manifest)


def load_model(directory) -> tuple[SiameseModel, dict]:
    params, manifest = ndiff.load_checkpoint(directory)
    enc_cfg = EncoderConfig.from_dict(manifest["encoder"])
    encoder = Encoder(enc_cfg, manifest["feature_dim"],
                      manifest["node_types"], manifest["edge_types"])
    head = MatchingHead(manifest["head"], enc_cfg.dim)
    model = SiameseModel(encoder, head)
    model.load_state_dict(params)
    return model, manifest

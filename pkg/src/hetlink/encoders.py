"""Graph encoders producing node embeddings from a frozen HeteroGraph.

Three interchangeable kinds share one interface:

* ``graphsage`` -- mean-aggregate neighbors, concat with self, linear, ELU.
* ``rgcn``      -- relation-specific weight matrices with 1/|N_v^r| norms.
* ``magnn``     -- metapath-instance encoding with intra-metapath multi-head
  attention and inter-metapath attention fusion.

Attention logits use LeakyReLU; aggregation outputs use ELU.  All forward
passes are built from ndiff ops so gradients flow to every parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import ndiff
from .hetgraph import GraphError, HeteroGraph, Metapath, SELF_EDGE_TYPE
from .ndiff import Parameter, Tensor

ENCODER_KINDS = ("graphsage", "rgcn", "magnn")


class EncoderError(Exception):
    pass


@dataclass
class EncoderConfig:
    kind: str = "graphsage"
    num_layers: int = 2
    dim: int = 128
    heads: int = 2
    attn_dim: int = 128
    dropout: float = 0.5
    metapaths: list[Metapath] = field(default_factory=list)
    leaky_slope: float = 0.01
    identity_residual: bool = True      # add identity blocks to aggregation weights
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in ENCODER_KINDS:
            raise EncoderError(f"unknown encoder kind {self.kind!r}")
        if not 1 <= self.num_layers <= 4:
            raise EncoderError("num_layers must be in [1, 4]")
        if self.heads < 1:
            raise EncoderError("heads must be >= 1")
        if self.kind == "magnn":
            if not self.metapaths:
                raise EncoderError("magnn needs at least one metapath")
            if self.dim % self.heads != 0:
                raise EncoderError("dim must be divisible by heads")

    @classmethod
    def from_dict(cls, data: dict) -> "EncoderConfig":
        data = dict(data)
        if "metapaths" in data:
            data["metapaths"] = [m if isinstance(m, Metapath) else Metapath.parse(m)
                                 for m in data["metapaths"]]
        if "layers" in data:
            data["num_layers"] = data.pop("layers")
        cfg = cls(**data)
        cfg.validate()
        return cfg


@dataclass
class AttentionRecord:
    """Attention weights exposed for inspection: one probability vector each."""
    kind: str                  # "intra" or "inter"
    label: str
    weights: np.ndarray        # concatenation of per-group softmax outputs
    segments: np.ndarray       # group id per weight


def _graph_cache(graph: HeteroGraph) -> dict:
    cache = getattr(graph, "_encoder_cache", None)
    if cache is None:
        cache = {}
        graph._encoder_cache = cache
    return cache


def _positions(graph: HeteroGraph) -> dict[int, int]:
    cache = _graph_cache(graph)
    if "pos" not in cache:
        cache["pos"] = {nid: i for i, nid in enumerate(graph.node_ids)}
    return cache["pos"]


def _mean_adjacency(graph: HeteroGraph) -> sp.csr_matrix:
    """Row v holds 1/|N_v| over all-relation neighbors; zero row if isolated."""
    cache = _graph_cache(graph)
    if "mean_adj" not in cache:
        pos = _positions(graph)
        n = len(graph)
        rows, cols, vals = [], [], []
        for nid in graph.node_ids:
            neigh = sorted(graph.neighbors(nid))
            for u in neigh:
                rows.append(pos[nid])
                cols.append(pos[u])
                vals.append(1.0 / len(neigh))
        cache["mean_adj"] = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return cache["mean_adj"]


def _relation_adjacency(graph: HeteroGraph, relation: str) -> sp.csr_matrix:
    """Row v holds 1/c_{v,r} over N_v^r with c_{v,r} = |N_v^r|."""
    cache = _graph_cache(graph).setdefault("rel_adj", {})
    if relation not in cache:
        pos = _positions(graph)
        n = len(graph)
        rows, cols, vals = [], [], []
        for nid in graph.node_ids:
            neigh = sorted(graph.neighbors_by_relation(nid, relation))
            for u in neigh:
                rows.append(pos[nid])
                cols.append(pos[u])
                vals.append(1.0 / len(neigh))
        cache[relation] = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return cache[relation]


@dataclass
class MetapathBatch:
    """Vectorized view of all instances of one metapath in one graph."""
    avg: sp.csr_matrix            # (instances, n) row-averaging matrix
    target_pos: np.ndarray        # (instances,) row position of the target node
    segments: np.ndarray          # (instances,) compact target index
    covered_pos: np.ndarray       # (num_targets,) row positions with >= 1 instance


def _metapath_batch(graph: HeteroGraph, path: Metapath) -> MetapathBatch:
    cache = _graph_cache(graph).setdefault("metapath", {})
    key = path.label()
    if key not in cache:
        pos = _positions(graph)
        n = len(graph)
        instances: list[tuple[int, ...]] = []
        targets: list[int] = []
        for nid in graph.nodes_of_type(path.tail):
            # simple instances only: cyclic ones re-inject the target's own
            # feature, which drowns the neighborhood signal being compared
            for inst in graph.metapath_instances(nid, path, anchor="end",
                                                 simple=True):
                instances.append(inst)
                targets.append(pos[nid])
        rows, cols, vals = [], [], []
        for i, inst in enumerate(instances):
            w = 1.0 / len(inst)
            for nid in inst:
                rows.append(i)
                cols.append(pos[nid])
                vals.append(w)
        avg = sp.csr_matrix((vals, (rows, cols)), shape=(len(instances), n))
        covered = sorted(set(targets))
        compact = {p: i for i, p in enumerate(covered)}
        cache[key] = MetapathBatch(
            avg=avg,
            target_pos=np.array(targets, dtype=np.int64),
            segments=np.array([compact[t] for t in targets], dtype=np.int64),
            covered_pos=np.array(covered, dtype=np.int64),
        )
    return cache[key]


class Encoder:
    """One parameter set usable on any graph over the given type registries.

    The same instance encodes both the reference and the query graph, which
    is what makes the Siamese pairing weight-shared by construction.
    """

    def __init__(self, config: EncoderConfig, feature_dim: int,
                 node_types, edge_types):
        config.validate()
        self.config = config
        self.feature_dim = feature_dim
        self.node_types = sorted(node_types)
        self.edge_types = sorted(edge_types)
        self._params: dict[str, Parameter] = {}
        rng = np.random.default_rng(config.seed)
        d = config.dim
        K = config.num_layers

        # Identity-residual initialization: shrink the random part and add
        # identity blocks so the untrained network is already a similarity-
        # preserving neighborhood average.  The first layer reads only the
        # aggregated neighbors (a node's own surface form may be arbitrarily
        # corrupted); later layers keep their input and blend in structure.
        eye_scale = 0.1 if config.identity_residual else 1.0

        def par(name, shape, init="glorot", eye=0.0):
            data = ndiff.glorot(rng, shape) if init == "glorot" else np.zeros(shape)
            data = data * eye_scale if init == "glorot" else data
            if eye and config.identity_residual:
                data = data + eye * np.eye(shape[0], shape[-1])
            p = Parameter(data, name)
            self._params[name] = p
            return p

        n_rel = max(1, len(self.edge_types))
        if config.kind == "graphsage":
            for k in range(K):
                d_in = feature_dim if k == 0 else d
                p = par(f"graphsage.W[{k}]", (2 * d_in, d))
                if config.identity_residual:
                    self_w, nbr_w = (0.0, 1.0) if k == 0 else (1.0, 0.3)
                    p.data[:d_in] += self_w * np.eye(d_in, d)
                    p.data[d_in:] += nbr_w * np.eye(d_in, d)
        elif config.kind == "rgcn":
            for k in range(K):
                d_in = feature_dim if k == 0 else d
                par(f"rgcn.W0[{k}]", (d_in, d), eye=0.0 if k == 0 else 1.0)
                for r in self.edge_types:
                    # the SELF relation would reinject the node's own (possibly
                    # corrupted) surface feature, so it starts at noise level
                    w = 0.0 if r == SELF_EDGE_TYPE else (1.0 if k == 0 else 0.3) / n_rel
                    par(f"rgcn.W[{r}][{k}]", (d_in, d), eye=w)
        else:
            for path in config.metapaths:
                path_types = set(path.node_types)
                missing = path_types - set(self.node_types)
                if missing:
                    raise EncoderError(f"metapath uses unknown node types {missing}")
            d_head = d // config.heads
            for t in self.node_types:
                par(f"magnn.in_proj[{t}]", (feature_dim, d), eye=1.0)
            for k in range(K):
                for path in config.metapaths:
                    label = path.label()
                    par(f"magnn.W_p[{label}][{k}]", (d, d_head), eye=1.0)
                    for h in range(config.heads):
                        par(f"magnn.a[{label}][{k}][h{h}]", (d + d_head,), init="zeros")
                par(f"magnn.beta[{k}]", (d,), init="zeros")

    # -- parameter access --------------------------------------------------

    def parameters(self) -> list[Parameter]:
        return [self._params[name] for name in sorted(self._params)]

    def param(self, name: str) -> Parameter:
        return self._params[name]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        if missing:
            raise EncoderError(f"checkpoint missing parameters: {sorted(missing)}")
        for name, p in self._params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise EncoderError(f"shape mismatch for {name}: {arr.shape} vs {p.data.shape}")
            p.data[...] = arr

    # -- forward -----------------------------------------------------------

    def encode(self, graph: HeteroGraph, features, targets=None,
               training: bool = False, rng: np.random.Generator | None = None,
               collect: list[AttentionRecord] | None = None) -> Tensor:
        """Embed all nodes, returning rows for `targets` (default: all nodes).

        `features` is an (n, feature_dim) array/tensor in node-id order.
        Dropout is applied to the input of every layer in training mode.
        """
        if not graph.frozen:
            raise EncoderError("graph must be frozen")
        x = features if isinstance(features, Tensor) else Tensor(features)
        if x.shape != (len(graph), self.feature_dim):
            raise EncoderError(
                f"features shape {x.shape} != ({len(graph)}, {self.feature_dim})")
        unknown_types = graph.node_types - set(self.node_types)
        if unknown_types:
            raise EncoderError(f"graph has unregistered node types {sorted(unknown_types)}")

        if self.config.kind == "magnn":
            x = self._project_types(graph, x)
        for k in range(self.config.num_layers):
            x = ndiff.dropout(x, self.config.dropout, training, rng)
            if self.config.kind == "graphsage":
                x = self._graphsage_layer(graph, x, k)
            elif self.config.kind == "rgcn":
                x = self._rgcn_layer(graph, x, k)
            else:
                x = self._magnn_layer(graph, x, k, collect)
        if targets is not None:
            pos = _positions(graph)
            x = ndiff.gather_rows(x, [pos[t] for t in targets])
        return x

    def _graphsage_layer(self, graph, x, k) -> Tensor:
        agg = ndiff.sparse_matmul(_mean_adjacency(graph), x)
        cat = ndiff.concat([x, agg], axis=1)
        return ndiff.elu(ndiff.matmul(cat, self._params[f"graphsage.W[{k}]"]))

    def _rgcn_layer(self, graph, x, k) -> Tensor:
        unseen = graph.edge_types - set(self.edge_types)
        if unseen:
            raise EncoderError(f"unseen relations at forward time: {sorted(unseen)}")
        out = ndiff.matmul(x, self._params[f"rgcn.W0[{k}]"])
        for r in self.edge_types:
            adj = _relation_adjacency(graph, r) if r in graph.edge_types else None
            if adj is None or adj.nnz == 0:
                continue
            msg = ndiff.sparse_matmul(adj, ndiff.matmul(x, self._params[f"rgcn.W[{r}][{k}]"]))
            out = ndiff.add(out, msg)
        return ndiff.elu(out)

    def _project_types(self, graph, x) -> Tensor:
        """Type-specific input projection into the shared latent space."""
        pos = _positions(graph)
        out = Tensor(np.zeros((len(graph), self.config.dim)))
        for t in sorted(graph.node_types):
            idx = np.array([pos[n] for n in graph.nodes_of_type(t)], dtype=np.int64)
            proj = ndiff.matmul(ndiff.gather_rows(x, idx), self._params[f"magnn.in_proj[{t}]"])
            out = ndiff.scatter_rows(out, idx, proj)
        return out

    def _magnn_layer(self, graph, x, k, collect) -> Tensor:
        cfg = self.config
        slope = cfg.leaky_slope
        per_node: list[tuple[np.ndarray, Tensor]] = []   # (covered positions, rows)
        for path in cfg.metapaths:
            if not set(path.node_types) <= graph.node_types:
                continue
            batch = _metapath_batch(graph, path)
            if batch.avg.shape[0] == 0:
                continue
            label = path.label()
            n_seg = len(batch.covered_pos)
            h_mean = ndiff.sparse_matmul(batch.avg, x)
            h_inst = ndiff.matmul(h_mean, self._params[f"magnn.W_p[{label}][{k}]"])
            h_tgt = ndiff.gather_rows(x, batch.target_pos)
            cat = ndiff.concat([h_tgt, h_inst], axis=1)
            head_outs = []
            for h in range(cfg.heads):
                a = self._params[f"magnn.a[{label}][{k}][h{h}]"]
                logits = ndiff.leaky_relu(ndiff.matmul(cat, a), slope)
                alpha = ndiff.segment_softmax(logits, batch.segments, n_seg)
                if collect is not None:
                    collect.append(AttentionRecord(
                        "intra", f"{label}/layer{k}/head{h}",
                        alpha.data.copy(), batch.segments.copy()))
                weighted = ndiff.mul(ndiff.reshape(alpha, (-1, 1)), h_inst)
                head_outs.append(ndiff.elu(ndiff.segment_sum(weighted, batch.segments, n_seg)))
            intra = ndiff.concat(head_outs, axis=1)
            per_node.append((batch.covered_pos, intra))

        if not per_node:
            return x
        stacked = ndiff.concat([rows for _, rows in per_node], axis=0)
        covered = sorted({int(p) for positions, _ in per_node for p in positions})
        compact = {p: i for i, p in enumerate(covered)}
        seg = np.concatenate([[compact[int(p)] for p in positions]
                              for positions, _ in per_node]).astype(np.int64)
        logits = ndiff.leaky_relu(ndiff.matmul(stacked, self._params[f"magnn.beta[{k}]"]), slope)
        beta = ndiff.segment_softmax(logits, seg, len(covered))
        if collect is not None:
            collect.append(AttentionRecord("inter", f"layer{k}", beta.data.copy(), seg.copy()))
        fused = ndiff.segment_sum(ndiff.mul(ndiff.reshape(beta, (-1, 1)), stacked),
                                  seg, len(covered))
        return ndiff.scatter_rows(x, np.array(covered, dtype=np.int64), fused)


# -- spec-level layer operations (thin wrappers used by tests) -------------

def encode_metapath_instance(w_p: Parameter, instance_features) -> Tensor:
    """Mean of node vectors along one instance, then the instance matrix."""
    feats = Tensor(np.atleast_2d(np.asarray(instance_features, dtype=np.float64)))
    if feats.shape[0] == 0:
        raise EncoderError("empty metapath instance")
    mean = ndiff.reshape(ndiff.mean_rows(feats), (1, -1))
    return ndiff.matmul(mean, w_p)


def build_encoder_for_graph(config: EncoderConfig, graph: HeteroGraph,
                            feature_dim: int) -> Encoder:
    return Encoder(config, feature_dim, graph.node_types, graph.edge_types)

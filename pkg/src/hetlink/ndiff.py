"""Minimal dense-tensor reverse-mode autodiff and the Adam optimizer.

Everything is float64 numpy underneath.  A forward pass builds an implicit
tape through parent links; ``backward(loss)`` walks it once in reverse
topological order and accumulates gradients into every reachable
:class:`Parameter`.  Rank <= 2 tensors are sufficient for all encoders.
"""

from __future__ import annotations

import json
import os

import numpy as np
import scipy.sparse as sp

DEBUG_CHECK_FINITE = False


class NdiffError(Exception):
    pass


class Tensor:
    __slots__ = ("data", "_parents", "_backward", "needs_grad")

    def __init__(self, data, parents=(), backward=None, needs_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self._parents = parents
        self._backward = backward
        self.needs_grad = needs_grad
        if DEBUG_CHECK_FINITE and not np.all(np.isfinite(self.data)):
            raise NdiffError("non-finite values in tensor")

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, needs_grad={self.needs_grad})"


class Parameter(Tensor):
    """Trainable tensor with a gradient slot and a stable name."""

    __slots__ = ("name", "grad")

    def __init__(self, data, name: str):
        super().__init__(np.array(data, dtype=np.float64), needs_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    needs = any(p.needs_grad for p in parents)
    if not needs:
        return Tensor(data)
    return Tensor(data, parents=tuple(parents), backward=backward, needs_grad=True)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum grad down to `shape` to undo numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# -- basic ops -------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _make(out, (a, b), back)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data - b.data

    def back(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)
    return _make(out, (a, b), back)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data * b.data

    def back(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return _make(out, (a, b), back)


def scalar_mul(a, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)

    def back(g):
        return (g * c,)
    return _make(a.data * c, (a,), back)


def neg(a) -> Tensor:
    return scalar_mul(a, -1.0)


def matmul(a, b) -> Tensor:
    """2-D @ 2-D or 2-D @ 1-D dense matrix product."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim not in (1, 2):
        raise NdiffError(f"matmul supports 2-D @ 1/2-D, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise NdiffError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def back(g):
        if b.data.ndim == 1:
            return np.outer(g, b.data), a.data.T @ g
        return g @ b.data.T, a.data.T @ g
    return _make(out, (a, b), back)


def sparse_matmul(s, x) -> Tensor:
    """Constant sparse matrix times tensor; s is never differentiated."""
    if not sp.issparse(s):
        raise NdiffError("first argument must be a scipy sparse matrix")
    x = _as_tensor(x)
    out = np.asarray(s @ x.data)

    def back(g):
        return (np.asarray(s.T @ g),)
    return _make(out, (x,), back)


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise NdiffError("concat of nothing")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def back(g):
        return tuple(np.split(g, np.cumsum(sizes)[:-1], axis=axis))
    return _make(out, tensors, back)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    out = a.data.reshape(shape)

    def back(g):
        return (g.reshape(a.shape),)
    return _make(out, (a,), back)


def gather_rows(a, idx) -> Tensor:
    a = _as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    out = a.data[idx]

    def back(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, idx, g)
        return (ga,)
    return _make(out, (a,), back)


def scatter_rows(base, idx, rows) -> Tensor:
    """Copy of `base` with rows at `idx` replaced by `rows`."""
    base, rows = _as_tensor(base), _as_tensor(rows)
    idx = np.asarray(idx, dtype=np.int64)
    out = base.data.copy()
    out[idx] = rows.data

    def back(g):
        gb = g.copy()
        gb[idx] = 0.0
        return gb, g[idx]
    return _make(out, (base, rows), back)


def segment_sum(a, segments, num_segments: int) -> Tensor:
    """Sum rows of `a` grouped by segment id."""
    a = _as_tensor(a)
    segments = np.asarray(segments, dtype=np.int64)
    out = np.zeros((num_segments,) + a.shape[1:])
    np.add.at(out, segments, a.data)

    def back(g):
        return (g[segments],)
    return _make(out, (a,), back)


def mean_rows(a) -> Tensor:
    """Column means: (n, d) -> (d,).  Errors on zero rows."""
    a = _as_tensor(a)
    n = a.shape[0]
    if n == 0:
        raise NdiffError("mean_rows of empty tensor")
    out = a.data.mean(axis=0)

    def back(g):
        return (np.broadcast_to(g / n, a.shape).copy(),)
    return _make(out, (a,), back)


def sum_all(a) -> Tensor:
    a = _as_tensor(a)

    def back(g):
        return (np.full(a.shape, float(g)),)
    return _make(a.data.sum(), (a,), back)


def sum_axis1(a) -> Tensor:
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise NdiffError("sum_axis1 expects a 2-D tensor")
    out = a.data.sum(axis=1)

    def back(g):
        return (np.repeat(g[:, None], a.shape[1], axis=1),)
    return _make(out, (a,), back)


def l2_normalize_rows(a, eps: float = 1e-12) -> Tensor:
    """Rows scaled to unit L2 norm (gradient projected off the row direction)."""
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise NdiffError("l2_normalize_rows expects a 2-D tensor")
    norms = np.sqrt((a.data ** 2).sum(axis=1, keepdims=True)) + eps
    out = a.data / norms

    def back(g):
        dots = (g * out).sum(axis=1, keepdims=True)
        return ((g - out * dots) / norms,)
    return _make(out, (a,), back)


# -- activations -----------------------------------------------------------

def leaky_relu(a, slope: float = 0.01) -> Tensor:
    a = _as_tensor(a)
    out = np.where(a.data >= 0, a.data, slope * a.data)

    def back(g):
        return (g * np.where(a.data >= 0, 1.0, slope),)
    return _make(out, (a,), back)


def elu(a) -> Tensor:
    a = _as_tensor(a)
    out = np.where(a.data > 0, a.data, np.expm1(np.minimum(a.data, 0.0)))

    def back(g):
        return (g * np.where(a.data > 0, 1.0, out + 1.0),)
    return _make(out, (a,), back)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    out = np.empty_like(a.data)
    pos = a.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ex = np.exp(a.data[~pos])
    out[~pos] = ex / (1.0 + ex)

    def back(g):
        return (g * out * (1.0 - out),)
    return _make(out, (a,), back)


def softplus(a) -> Tensor:
    """log(1 + e^x) via the overflow-free identity max(x,0) + log1p(e^-|x|)."""
    a = _as_tensor(a)
    out = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))
    sig = 1.0 / (1.0 + np.exp(-np.clip(a.data, -500, 500)))

    def back(g):
        return (g * sig,)
    return _make(out, (a,), back)


def softmax(a) -> Tensor:
    """Stable softmax of a 1-D tensor."""
    a = _as_tensor(a)
    if a.data.ndim != 1 or a.data.size == 0:
        raise NdiffError("softmax expects a non-empty 1-D tensor")
    z = a.data - a.data.max()
    e = np.exp(z)
    out = e / e.sum()

    def back(g):
        return (out * (g - np.dot(g, out)),)
    return _make(out, (a,), back)


def segment_softmax(logits, segments, num_segments: int) -> Tensor:
    """Softmax within each segment of a 1-D logit tensor."""
    a = _as_tensor(logits)
    if a.data.ndim != 1:
        raise NdiffError("segment_softmax expects 1-D logits")
    segments = np.asarray(segments, dtype=np.int64)
    maxes = np.full(num_segments, -np.inf)
    np.maximum.at(maxes, segments, a.data)
    e = np.exp(a.data - maxes[segments])
    denom = np.zeros(num_segments)
    np.add.at(denom, segments, e)
    out = e / denom[segments]

    def back(g):
        dot = np.zeros(num_segments)
        np.add.at(dot, segments, g * out)
        return (out * (g - dot[segments]),)
    return _make(out, (a,), back)


def dropout(a, rate: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; identity when not training or rate == 0."""
    if not 0.0 <= rate < 1.0:
        raise NdiffError("dropout rate must be in [0, 1)")
    a = _as_tensor(a)
    if not training or rate == 0.0:
        return a
    if rng is None:
        raise NdiffError("training-mode dropout needs an explicit rng")
    mask = (rng.random(a.shape) >= rate) / (1.0 - rate)

    def back(g):
        return (g * mask,)
    return _make(a.data * mask, (a,), back)


# -- backward pass ---------------------------------------------------------

def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(p) into every reachable Parameter's grad slot."""
    if loss.data.size != 1:
        raise NdiffError("backward requires a scalar loss")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.needs_grad and id(p) not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if isinstance(node, Parameter):
            node.grad += g.reshape(node.grad.shape)
            continue
        if node._backward is None:
            continue
        parent_grads = node._backward(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.needs_grad:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + pg
            else:
                grads[id(parent)] = pg


# -- optimizer -------------------------------------------------------------

class Adam:
    """Adam with decoupled weight decay; zeroes grads after each step."""

    def __init__(self, params, lr: float = 1e-3, weight_decay: float = 0.0,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise NdiffError("duplicate parameter names")
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self._m = {p.name: np.zeros_like(p.data) for p in self.params}
        self._v = {p.name: np.zeros_like(p.data) for p in self.params}

    def step(self) -> None:
        self.t += 1
        for p in self.params:
            if not np.all(np.isfinite(p.grad)):
                raise NdiffError(f"non-finite gradient for parameter {p.name!r}")
            m = self._m[p.name]
            v = self._v[p.name]
            m[...] = self.beta1 * m + (1 - self.beta1) * p.grad
            v[...] = self.beta2 * v + (1 - self.beta2) * p.grad ** 2
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            if self.weight_decay:
                p.data *= 1.0 - self.lr * self.weight_decay
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            p.zero_grad()

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def glorot(rng: np.random.Generator, shape) -> np.ndarray:
    fan_in, fan_out = (shape[0], shape[-1]) if len(shape) > 1 else (shape[0], shape[0])
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# -- checkpoints -----------------------------------------------------------

def save_checkpoint(directory, params: dict[str, np.ndarray], manifest: dict) -> None:
    os.makedirs(directory, exist_ok=True)
    np.savez(os.path.join(directory, "params.npz"),
             **{name: np.asarray(v, dtype=np.float64) for name, v in params.items()})
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_checkpoint(directory) -> tuple[dict[str, np.ndarray], dict]:
    npz = np.load(os.path.join(directory, "params.npz"))
    params = {name: npz[name] for name in npz.files}
    with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    return params, manifest

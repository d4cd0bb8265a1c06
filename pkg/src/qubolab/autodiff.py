"""Small reverse-mode autodiff over numpy arrays, graph layers and Adam.

Every op that touches a tensor attached to a :class:`Tape` appends a record
``(output, parents, backward_fn)``; :meth:`Tape.backward` walks the records in
reverse. Parameters live in a :class:`ParamStore`, which owns the tape used by
one training run.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .graph import Graph

# adjacency/QUBO operators at or below this size are densified: numpy matmul on
# small dense arrays beats scipy's per-call overhead.
DENSE_LIMIT = 512


class Tape:
    def __init__(self):
        self.records: list[tuple["Tensor", tuple["Tensor", ...], Callable]] = []
        self.enabled = True

    @contextmanager
    def no_grad(self):
        prev, self.enabled = self.enabled, False
        try:
            yield
        finally:
            self.enabled = prev

    def clear(self):
        self.records.clear()

    def backward(self, loss: "Tensor"):
        if loss.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        loss.grad = np.ones_like(loss.data)
        for out, parents, fn in reversed(self.records):
            if out.grad is None:
                continue
            grads = fn(out.grad)
            for p, g in zip(parents, grads):
                if g is None or not p.requires_grad:
                    continue
                p.grad = g if p.grad is None else p.grad + g
            if not out.is_param:
                out.grad = None
        self.records.clear()


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "tape", "is_param")
    __array_priority__ = 100

    def __init__(self, data, tape: Tape | None = None, requires_grad: bool = False,
                 is_param: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.tape = tape
        self.is_param = is_param

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(data, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    tape = None
    for p in parents:
        if p.requires_grad and p.tape is not None and p.tape.enabled:
            tape = p.tape
            break
    out = Tensor(data)
    if tape is not None:
        out.requires_grad = True
        out.tape = tape
        tape.records.append((out, tuple(parents), backward))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.data.shape, b.data.shape
    return _record(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a: Tensor) -> Tensor:
    return _record(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return _record(ad * bd, (a, b),
                   lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def scale(a: Tensor, c: float) -> Tensor:
    return _record(a.data * c, (a,), lambda g: (g * c,))


def log(a: Tensor) -> Tensor:
    ad = a.data
    return _record(np.log(ad), (a,), lambda g: (g / ad,))


def sigmoid(a: Tensor) -> Tensor:
    s = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _record(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _record(t, (a,), lambda g: (g * (1.0 - t * t),))


def relu(a: Tensor) -> Tensor:
    pos = a.data > 0
    return _record(np.where(pos, a.data, 0.0), (a,), lambda g: (g * pos,))


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    k = np.where(a.data > 0, 1.0, slope)
    return _record(a.data * k, (a,), lambda g: (g * k,))


def elu(a: Tensor, alpha: float = 1.0) -> Tensor:
    pos = a.data > 0
    ex = alpha * np.expm1(np.minimum(a.data, 0.0))
    out = np.where(pos, a.data, ex)
    return _record(out, (a,), lambda g: (g * np.where(pos, 1.0, ex + alpha),))


_ACTIVATIONS = {"sigmoid": sigmoid, "relu": relu, "elu": elu, "tanh": tanh,
                "leaky_relu": leaky_relu}


def apply_activation(kind: str, m: Tensor) -> Tensor:
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    return fn(as_tensor(m))


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    if rate <= 0.0 or rng is None:
        return a
    keep = (rng.random(a.data.shape) >= rate) / (1.0 - rate)
    return _record(a.data * keep, (a,), lambda g: (g * keep,))


# ---------------------------------------------------------------- reductions / shape

def sum_(a: Tensor, axis: int | None = None) -> Tensor:
    shape = a.data.shape
    if axis is None:
        return _record(np.array(a.data.sum()), (a,),
                       lambda g: (np.broadcast_to(g, shape).copy(),))
    out = a.data.sum(axis=axis, keepdims=True)
    return _record(out, (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def transpose(a: Tensor) -> Tensor:
    return _record(a.data.T, (a,), lambda g: (g.T,))


def take_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    shape = a.data.shape

    def back(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return _record(a.data[idx], (a,), back)


# ---------------------------------------------------------------- products

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim != 2 or bd.ndim != 2 or ad.shape[1] != bd.shape[0]:
        raise ValueError(f"matmul shape mismatch {ad.shape} @ {bd.shape}")

    def back(g):
        return (g @ bd.T if a.requires_grad else None, ad.T @ g if b.requires_grad else None)

    return _record(ad @ bd, (a, b), back)


def operator(m) -> np.ndarray | sp.csr_matrix:
    """Densify small sparse operators; keep large ones sparse."""
    if sp.issparse(m):
        return m.toarray() if m.shape[0] <= DENSE_LIMIT else m.tocsr()
    return np.asarray(m, dtype=np.float64)


def const_matmul(op, a: Tensor, op_t=None) -> Tensor:
    """``op @ a`` for a constant (dense or sparse) matrix ``op``."""
    if op.shape[1] != a.data.shape[0]:
        raise ValueError(f"shape mismatch {op.shape} @ {a.data.shape}")
    op_t = op.T if op_t is None else op_t
    return _record(np.asarray(op @ a.data), (a,), lambda g: (np.asarray(op_t @ g),))


def quadratic_form(p: Tensor, sym) -> Tensor:
    """``p^T S p`` for a constant symmetric operator ``S``; ``p`` has n entries."""
    pd = p.data.reshape(-1)
    if sym.shape[0] != pd.size:
        raise ValueError(f"dimension mismatch: operator {sym.shape}, vector {pd.size}")
    sp_ = np.asarray(sym @ pd).reshape(-1)
    shape = p.data.shape
    return _record(np.array(pd @ sp_), (p,), lambda g: ((2.0 * g * sp_).reshape(shape),))


# ---------------------------------------------------------------- graph layers

@dataclass(frozen=True)
class NormalizedAdjacency:
    """D^-1/2 (A + I) D^-1/2, D the degree matrix of A + I (or of A without self-loops)."""

    n: int
    matrix: sp.csr_matrix
    op: object  # dense array or csr, whichever is cheaper to multiply
    self_loops: bool = True


def normalize_adjacency(g: Graph, self_loops: bool = True) -> NormalizedAdjacency:
    """Symmetrically normalized adjacency.

    Without self-loops an isolated node gets an all-zero row instead of weight 1.
    """
    a = g.adjacency
    if self_loops:
        a = a + sp.identity(g.n, format="csr")
    deg = np.asarray(a.sum(axis=1)).reshape(-1)
    dinv = 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0))
    d = sp.diags(dinv)
    mat = (d @ a @ d).tocsr()
    return NormalizedAdjacency(g.n, mat, operator(mat), self_loops)


def gcn_forward(adj: NormalizedAdjacency, h: Tensor, w: Tensor) -> Tensor:
    if h.shape[0] != adj.n or h.shape[1] != w.shape[0]:
        raise ValueError(f"gcn shape mismatch: n={adj.n}, H {h.shape}, W {w.shape}")
    # op is symmetric, so it is its own transpose
    return const_matmul(adj.op, matmul(h, w), op_t=adj.op)


def attention_mask(g: Graph) -> np.ndarray:
    """Boolean n x n mask of N(i) + {i}."""
    mask = g.adjacency.toarray() > 0
    np.fill_diagonal(mask, True)
    return mask


def gat_attention(z: Tensor, attn: Tensor, mask: np.ndarray, slope: float = 0.2) -> Tensor:
    """Single-head attention aggregation over precomputed features ``z = H W``."""
    n, d = z.shape
    if attn.shape != (2 * d, 1):
        raise ValueError(f"attn must be ({2 * d}, 1), got {attn.shape}")
    zd, ad = z.data, attn.data
    a_src, a_dst = ad[:d, 0], ad[d:, 0]
    pre = (zd @ a_src)[:, None] + (zd @ a_dst)[None, :]
    slope_k = np.where(pre > 0, 1.0, slope)
    e = np.where(mask, pre * slope_k, -np.inf)
    e = e - e.max(axis=1, keepdims=True)
    alpha = np.exp(e)
    alpha /= alpha.sum(axis=1, keepdims=True)
    out = alpha @ zd

    def back(g):
        dz = alpha.T @ g
        dalpha = g @ zd.T
        de = alpha * (dalpha - np.sum(alpha * dalpha, axis=1, keepdims=True))
        dpre = de * slope_k  # alpha is 0 off-mask, so de already vanishes there
        ds_src = dpre.sum(axis=1)
        ds_dst = dpre.sum(axis=0)
        dz = dz + np.outer(ds_src, a_src) + np.outer(ds_dst, a_dst)
        dattn = np.concatenate([zd.T @ ds_src, zd.T @ ds_dst])[:, None]
        return dz, dattn

    return _record(out, (z, attn), back)


def gat_forward(g_or_mask, h: Tensor, w: Tensor, attn: Tensor) -> Tensor:
    """e_ij = leaky_relu([h_i W || h_j W] . attn) over N(i) + {i}, softmax, aggregate."""
    mask = attention_mask(g_or_mask) if isinstance(g_or_mask, Graph) else g_or_mask
    if h.shape[0] != mask.shape[0] or h.shape[1] != w.shape[0]:
        raise ValueError(f"gat shape mismatch: n={mask.shape[0]}, H {h.shape}, W {w.shape}")
    return gat_attention(matmul(h, w), attn, mask)


# ---------------------------------------------------------------- parameters

def glorot_init(rows: int, cols: int, seed) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    lim = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-lim, lim, size=(rows, cols))


class ParamStore:
    """Named parameters with gradients and Adam state, bound to one tape."""

    def __init__(self, seed=None):
        self.tape = Tape()
        self.rng = np.random.default_rng(seed)
        self.slots: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0
        self._flat: tuple | None = None  # (names, data, m, v, spans) once packed

    def add(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(np.array(value, dtype=np.float64), tape=self.tape, requires_grad=True,
                   is_param=True)
        self.slots[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        self._flat = None
        return t

    def add_glorot(self, name: str, rows: int, cols: int) -> Tensor:
        return self.add(name, glorot_init(rows, cols, self.rng))

    def __getitem__(self, name: str) -> Tensor:
        return self.slots[name]

    def __contains__(self, name: str) -> bool:
        return name in self.slots

    def names(self) -> list[str]:
        return list(self.slots)

    def grad(self, name: str) -> np.ndarray:
        g = self.slots[name].grad
        return np.zeros_like(self.slots[name].data) if g is None else g

    def zero_grad(self):
        for t in self.slots.values():
            t.grad = None

    def backward(self, loss: Tensor):
        self.tape.backward(loss)

    def packed(self) -> tuple:
        """Move every slot, and its Adam moments, into one contiguous buffer.

        Slot tensors keep their identity; their ``data`` becomes a view of the buffer so
        the optimizer can update all parameters with a few vectorized calls.
        """
        if self._flat is None:
            names = list(self.slots)
            spans, start = [], 0
            for k in names:
                spans.append((start, start + self.slots[k].data.size))
                start = spans[-1][1]
            data = np.concatenate([self.slots[k].data.ravel() for k in names])
            m = np.concatenate([self.m[k].ravel() for k in names])
            v = np.concatenate([self.v[k].ravel() for k in names])
            for k, (a, b) in zip(names, spans):
                shape = self.slots[k].data.shape
                self.slots[k].data = data[a:b].reshape(shape)
                self.m[k] = m[a:b].reshape(shape)
                self.v[k] = v[a:b].reshape(shape)
            self._flat = (names, data, m, v, spans)
        return self._flat

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.slots.items()}


def adam_step(params: ParamStore, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> ParamStore:
    names, data, m, v, spans = params.packed()
    params.step += 1
    bc1 = 1.0 - beta1 ** params.step
    bc2 = 1.0 - beta2 ** params.step
    g = np.zeros_like(data)
    for k, (a, b) in zip(names, spans):
        t = params.slots[k]
        if t.grad is not None:
            g[a:b] = t.grad.ravel()
        t.grad = None
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    g *= g
    g *= 1.0 - beta2
    v += g
    denom = np.sqrt(v / bc2)
    denom += eps
    data -= lr * (m / bc1) / denom
    return params

"""Graphs, seeded instance generation and the Max-Cut QUBO.

Edges are stored canonically as ``(u, v)`` with ``u < v``. Assignments are plain
integer numpy vectors of 0/1 labels, one entry per node.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """Raised for malformed edge-list text; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"node count must be positive, got {self.n}")
        canon = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            canon.append((min(u, v), max(u, v)))
        canon.sort()
        if len(set(canon)) != len(canon):
            raise ValueError("duplicate edge")
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_array(self) -> np.ndarray:
        """(m, 2) int64 array of canonical edges."""
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def degree(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        if self.m:
            np.add.at(deg, self.edge_array.ravel(), 1)
        return deg

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency matrix without self-loops."""
        e = self.edge_array
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(len(rows), dtype=np.float64)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    def to_edge_list(self) -> str:
        lines = [f"{self.n} {self.m}"] + [f"{u} {v}" for u, v in self.edges]
        return "\n".join(lines) + "\n"


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple((u, v) for u in range(n) for v in range(u + 1, n)))


def cycle_graph(n: int) -> Graph:
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)))


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def parse_edge_list(text: str) -> Graph:
    """Parse the ``n m`` header + ``u v`` lines format.

    Blank lines are ignored. Errors name the 1-based line they occur on.
    """
    lines = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines())]
    lines = [(no, toks) for no, toks in lines if toks]
    if not lines:
        raise GraphFormatError("empty input", 1)

    def ints(no: int, toks: list[str]) -> tuple[int, int]:
        if len(toks) != 2:
            raise GraphFormatError(f"expected two integers, got {len(toks)} fields", no)
        try:
            return int(toks[0]), int(toks[1])
        except ValueError:
            raise GraphFormatError(f"non-integer field in {' '.join(toks)!r}", no) from None

    hno, htoks = lines[0]
    n, m = ints(hno, htoks)
    if n < 1 or m < 0:
        raise GraphFormatError(f"invalid header n={n} m={m}", hno)
    if m > n * (n - 1) // 2:
        raise GraphFormatError(f"m={m} exceeds the {n * (n - 1) // 2} possible edges", hno)
    body = lines[1:]
    if len(body) != m:
        raise GraphFormatError(f"header declares {m} edges, found {len(body)}",
                               body[-1][0] if len(body) > m else hno)

    seen: dict[tuple[int, int], int] = {}
    edges = []
    for no, toks in body:
        u, v = ints(no, toks)
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"endpoint out of range [0, {n})", no)
        if u == v:
            raise GraphFormatError(f"self-loop at node {u}", no)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphFormatError(f"duplicate edge {key}, first seen on line {seen[key]}", no)
        seen[key] = no
        edges.append(key)
    return Graph(n, tuple(edges))


def read_graph(path) -> Graph:
    with open(path) as fh:
        return parse_edge_list(fh.read())


def generate_random_graph(n: int, m: int, seed: int) -> Graph:
    """Uniform G(n, m): ``m`` distinct unordered pairs drawn without replacement."""
    max_edges = n * (n - 1) // 2
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= m <= max_edges:
        raise ValueError(f"m={m} outside [0, {max_edges}] for n={n}")
    rng = np.random.default_rng(seed)
    picks = rng.choice(max_edges, size=m, replace=False)
    us, vs = np.triu_indices(n, 1)
    return Graph(n, tuple(zip(us[picks].tolist(), vs[picks].tolist())))


@dataclass(frozen=True)
class QuboMatrix:
    """Upper-triangular integer QUBO. Hamiltonian is sum_{i<=j} x_i Q_ij x_j."""

    n: int
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        for (i, j) in self.entries:
            if not 0 <= i <= j < self.n:
                raise ValueError(f"entry ({i}, {j}) not upper-triangular within n={self.n}")

    @cached_property
    def coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        keys = sorted(k for k, val in self.entries.items() if val != 0)
        rows = np.array([k[0] for k in keys], dtype=np.int64)
        cols = np.array([k[1] for k in keys], dtype=np.int64)
        vals = np.array([self.entries[k] for k in keys], dtype=np.int64)
        return rows, cols, vals

    @cached_property
    def upper(self) -> sp.csr_matrix:
        rows, cols, vals = self.coo
        return sp.csr_matrix((vals.astype(np.float64), (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def symmetric(self) -> sp.csr_matrix:
        """(U + U^T) / 2, so that p^T S p == sum_{i<=j} p_i Q_ij p_j."""
        u = self.upper
        return ((u + u.T) * 0.5).tocsr()

    @cached_property
    def terms_by_node(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """For each i, the (other endpoint, coefficient) pairs of every term touching i."""
        out: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for i, j, q in zip(*(a.tolist() for a in self.coo)):
            out[i].append((j, q))
            if i != j:
                out[j].append((i, q))
        return tuple(tuple(t) for t in out)

    def to_dense(self) -> np.ndarray:
        return self.upper.toarray()


def build_maxcut_qubo(g: Graph) -> QuboMatrix:
    # cut(x) = sum_{(i,j)} x_i + x_j - 2 x_i x_j
    entries: dict[tuple[int, int], int] = {}
    for i, d in enumerate(g.degree.tolist()):
        if d:
            entries[(i, i)] = d
    for u, v in g.edges:
        entries[(u, v)] = -2
    return QuboMatrix(g.n, entries)


def as_assignment(x: Iterable[int], n: int) -> np.ndarray:
    arr = np.asarray(x)
    if arr.shape != (n,):
        raise ValueError(f"assignment length {arr.size} does not match n={n}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("assignment entries must be 0 or 1")
    return arr.astype(np.int64)


def evaluate_hamiltonian(q: QuboMatrix, x) -> int:
    x = as_assignment(x, q.n)
    rows, cols, vals = q.coo
    return int(np.sum(vals * x[rows] * x[cols]))


def cut_size(g: Graph, x) -> int:
    x = as_assignment(x, g.n)
    if not g.m:
        return 0
    e = g.edge_array
    return int(np.count_nonzero(x[e[:, 0]] != x[e[:, 1]]))

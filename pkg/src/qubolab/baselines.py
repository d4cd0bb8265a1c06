"""Exhaustive Max-Cut oracle and a 1-flip local search baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, cut_size

MAX_BRUTE_FORCE_NODES = 24


@dataclass(frozen=True)
class OracleResult:
    value: int
    assignment: np.ndarray
    count: int  # optimal labelings among all 2^n (both orientations)


def brute_force_maxcut(g: Graph, chunk: int = 1 << 16) -> OracleResult:
    """Enumerate the 2^(n-1) labelings with x_0 = 0; the cut is flip-invariant."""
    if g.n > MAX_BRUTE_FORCE_NODES:
        raise ValueError(f"brute force limited to n <= {MAX_BRUTE_FORCE_NODES}, got {g.n}")
    if g.n == 1 or not g.m:
        count = 1 << g.n
        return OracleResult(0, np.zeros(g.n, dtype=np.int64), count)

    e = g.edge_array
    total = 1 << (g.n - 1)
    best, best_code, count = -1, 0, 0
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        # bit k of code is the label of node k + 1
        bits = np.zeros((codes.size, g.n), dtype=np.int8)
        bits[:, 1:] = (codes[:, None] >> np.arange(g.n - 1)) & 1
        cuts = np.count_nonzero(bits[:, e[:, 0]] != bits[:, e[:, 1]], axis=1)
        top = int(cuts.max())
        if top > best:
            best, count = top, 0
            best_code = int(codes[np.argmax(cuts)])
        if top == best:
            count += int(np.count_nonzero(cuts == top))
    x = np.zeros(g.n, dtype=np.int64)
    x[1:] = (best_code >> np.arange(g.n - 1)) & 1
    return OracleResult(best, x, 2 * count)


def local_search_1flip(g: Graph, seed) -> np.ndarray:
    """First-improvement 1-flip ascent from a seeded random labeling."""
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, size=g.n).astype(np.int64)
    nbrs = g.neighbors
    improved = True
    while improved:
        improved = False
        for i in range(g.n):
            same = sum(1 for j in nbrs[i] if x[j] == x[i])
            # flipping i turns its same-side edges into cut edges and vice versa
            if 2 * same > len(nbrs[i]):
                x[i] ^= 1
                improved = True
    return x


def is_one_flip_optimal(g: Graph, x: np.ndarray) -> bool:
    base = cut_size(g, x)
    for i in range(g.n):
        y = x.copy()
        y[i] ^= 1
        if cut_size(g, y) > base:
            return False
    return True

"""MCTS-GNN: tree search over partial labelings with GNN rollouts.

Tree states fix a subset of node labels. A rollout trains one persistent GNN on
the perturbed Hamiltonian loss (fixed labels substituted for probabilities),
thresholds the free nodes and scores the full labeling with the QUBO.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .graph import Graph, QuboMatrix, build_maxcut_qubo, evaluate_hamiltonian
from .pignn import default_widths
from .result import SolveResult, check_finite
from .stopping import StopMonitor


@dataclass
class MctsConfig:
    alpha: float = 1.0
    beta: float = 0.5
    lr: float = 1e-3
    rollout_patience: int = 100
    rollout_max_epochs: int = 1000
    patience: int = 700
    max_iterations: int = 10_000
    d1: int | None = None
    d2: int | None = None
    d3: int = 1
    self_loops: bool = False
    seed: int = 0

    def resolved(self, n: int) -> "MctsConfig":
        d1, d2 = default_widths(n)
        cfg = MctsConfig(**self.__dict__)
        cfg.d1 = self.d1 or d1
        cfg.d2 = self.d2 or (math.ceil(cfg.d1 / 2) if self.d1 else d2)
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        return cfg


class MctsNode:
    __slots__ = ("parent", "action", "prior", "children", "v", "w", "own_rollouts", "probs",
                 "depth")

    def __init__(self, parent: "MctsNode | None" = None, action: tuple[int, int] | None = None,
                 prior: float = 1.0):
        self.parent = parent
        self.action = action  # (variable, label)
        self.prior = prior
        self.children: list[MctsNode] = []
        self.v = 0
        self.w = 0.0
        self.own_rollouts = 0
        self.probs: np.ndarray | None = None
        self.depth = 0 if parent is None else parent.depth + 1

    def __repr__(self):
        return f"MctsNode(action={self.action}, v={self.v}, w={self.w}, children={len(self.children)})"

    def fixed(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """(X_v, labels): labeled-indicator vector and the fixed labels (0 where free)."""
        xv = np.zeros(n, dtype=np.int64)
        x = np.zeros(n, dtype=np.int64)
        node = self
        while node.action is not None:
            i, lab = node.action
            xv[i], x[i] = 1, lab
            node = node.parent
        return xv, x

    def path(self) -> list["MctsNode"]:
        out, node = [], self
        while node is not None:
            out.append(node)
            node = node.parent
        return out[::-1]


def init_mcts_params(n: int, d1: int, d2: int, d3: int, seed) -> ParamStore:
    params = ParamStore(seed)
    params.add_glorot("embed", n, d1)
    params.add_glorot("gcn1", d1, d1)
    params.add_glorot("gcn2", d1, d2)
    params.add_glorot("theta1", d3, 1)
    params.add_glorot("theta2", d3, d2)
    params.add_glorot("theta3", 1, d3)
    return params


def mcts_gnn_forward(adj: ad.NormalizedAdjacency, xv: np.ndarray, params: ParamStore) -> Tensor:
    """X_em = E; mu' = GCN(G, X_em); mu = relu(X_v th1^T + mu' th2^T); P = sigmoid(mu th3^T)."""
    h = ad.elu(ad.gcn_forward(adj, params["embed"], params["gcn1"]))
    mu_prime = ad.gcn_forward(adj, h, params["gcn2"])
    col = np.asarray(xv, dtype=np.float64).reshape(-1, 1)
    mu = ad.relu(ad.add(ad.matmul(col, ad.transpose(params["theta1"])),
                        ad.matmul(mu_prime, ad.transpose(params["theta2"]))))
    return ad.sigmoid(ad.matmul(mu, ad.transpose(params["theta3"])))


def transition_prior(probs: np.ndarray, i: int, label: int, xv: np.ndarray | None = None) -> float:
    if xv is not None and xv[i]:
        raise ValueError(f"variable {i} is already labeled")
    p = float(np.asarray(probs).reshape(-1)[i])
    return p if label == 1 else 1.0 - p


def perturbed_loss(q: QuboMatrix, xv: np.ndarray, x: np.ndarray, probs: Tensor, sym=None) -> Tensor:
    """Negated Hamiltonian with fixed labels substituted for the model's probabilities.

    Substituting z = X_v * x + (1 - X_v) * P into -sum_{i<=j} z_i Q_ij z_j yields the
    both-fixed, one-fixed (either endpoint) and free-free sums.
    """
    if probs.data.size != q.n or len(xv) != q.n or len(x) != q.n:
        raise ValueError("dimension mismatch")
    shape = probs.data.shape
    mask = np.asarray(xv, dtype=np.float64).reshape(shape)
    fixed = mask * np.asarray(x, dtype=np.float64).reshape(shape)
    z = ad.add(ad.mul(probs, 1.0 - mask), fixed)
    sym = ad.operator(q.symmetric) if sym is None else sym
    return ad.neg(ad.quadratic_form(z, sym))


def ucb(child: MctsNode, parent: MctsNode, alpha: float) -> float:
    if child.v == 0:
        return math.inf
    return child.w / child.v + alpha * child.prior * math.sqrt(math.log(parent.v) / child.v)


def expand(node: MctsNode, n: int) -> list[MctsNode]:
    """Create (var, 1) and (var, 0) children for every free variable, ascending."""
    xv, _ = node.fixed(n)
    probs = node.probs if node.probs is not None else np.full(n, 0.5)
    for i in np.flatnonzero(xv == 0).tolist():
        for lab in (1, 0):
            node.children.append(MctsNode(node, (i, lab), transition_prior(probs, i, lab)))
    return node.children


def select_and_expand(root: MctsNode, n: int, alpha: float) -> MctsNode:
    node = root
    while node.children:
        best, best_u = None, -math.inf
        for c in node.children:  # children are already in tie-break order
            u = ucb(c, node, alpha)
            if u > best_u:
                best, best_u = c, u
        node = best
    if node.v > 0 and node.depth < n:
        return expand(node, n)[0]
    return node


def backpropagate(leaf: MctsNode, reward: float):
    leaf.own_rollouts += 1
    node = leaf
    while node is not None:
        node.v += 1
        node.w += reward
        node = node.parent


@dataclass
class RolloutResult:
    reward: int
    assignment: np.ndarray
    epochs: int
    probs: np.ndarray | None


def rollout(leaf: MctsNode, q: QuboMatrix, adj: ad.NormalizedAdjacency, params: ParamStore,
            cfg: MctsConfig, sym=None) -> RolloutResult:
    """Train the shared GNN under the leaf's fixed labels, then score the completed labeling."""
    n = q.n
    xv, x = leaf.fixed(n)
    if xv.all():
        return RolloutResult(evaluate_hamiltonian(q, x), x, 0, None)
    sym = ad.operator(q.symmetric) if sym is None else sym
    monitor = StopMonitor("fuzzy", cfg.rollout_patience, direction="minimize")
    best_loss, best_probs = math.inf, None
    epochs = 0
    while epochs < cfg.rollout_max_epochs:
        epochs += 1
        probs = mcts_gnn_forward(adj, xv, params)
        loss = perturbed_loss(q, xv, x, probs, sym)
        value = check_finite(loss.item(), "rollout loss", epochs)
        params.backward(loss)
        ad.adam_step(params, cfg.lr)
        if value < best_loss:
            best_loss, best_probs = value, probs.data.reshape(-1).copy()
        if monitor.update(value):
            break
    full = np.where(xv == 1, x, (best_probs >= cfg.beta).astype(np.int64))
    return RolloutResult(evaluate_hamiltonian(q, full), full, epochs, best_probs)


TRACE_COLUMNS = ("iteration", "rollout_epochs", "rollout_reward", "best_so_far")


def train_mcts_gnn(g: Graph, cfg: MctsConfig | None = None, q: QuboMatrix | None = None,
                   on_iteration=None) -> SolveResult:
    cfg = (cfg or MctsConfig()).resolved(g.n)
    q = build_maxcut_qubo(g) if q is None else q
    adj = ad.normalize_adjacency(g, cfg.self_loops)
    sym = ad.operator(q.symmetric)
    params = init_mcts_params(g.n, cfg.d1, cfg.d2, cfg.d3, cfg.seed)
    root = MctsNode()
    monitor = StopMonitor("fuzzy", cfg.patience, direction="maximize")

    best_x, best_r = None, None
    trace, millis = [], []
    stop_reason = "max_iterations"
    t0 = time.perf_counter()
    it = 0
    while it < cfg.max_iterations:
        it += 1
        leaf = select_and_expand(root, g.n, cfg.alpha)
        res = rollout(leaf, q, adj, params, cfg, sym)
        if res.probs is not None:
            leaf.probs = res.probs
        backpropagate(leaf, res.reward)
        if best_r is None or res.reward > best_r:
            best_x, best_r = res.assignment, res.reward
        trace.append((it, res.epochs, res.reward, best_r))
        millis.append((time.perf_counter() - t0) * 1e3)
        if on_iteration is not None:
            on_iteration(it, root, leaf, res)
        if monitor.update(res.reward):
            stop_reason = "fuzzy_patience"
            break

    return SolveResult(
        solver="mcts",
        best_assignment=best_x,
        best_value=best_r,
        epochs=it,
        stop_reason=stop_reason,
        trace_columns=TRACE_COLUMNS,
        trace=trace,
        trace_millis=millis,
        seconds=time.perf_counter() - t0,
        extras={"tree_root_visits": root.v},
    )

"""GRL: GAT encoder, attention decoder and greedy sequential labeling.

Each epoch encodes the graph once, decodes greedily with the current weights
(no tape), then rebuilds the chosen nodes' scores on the tape in one batch so
the reward-weighted objective can be differentiated.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .graph import Graph, QuboMatrix, build_maxcut_qubo, evaluate_hamiltonian
from .pignn import default_widths
from .result import SolveResult, check_finite
from .stopping import StopMonitor


@dataclass
class GrlConfig:
    d1: int | None = None
    d2: int | None = None
    C: float = 10.0
    beta: float = 0.5
    lr: float = 1e-3
    patience: int = 700
    max_epochs: int = 10_000
    log_prob: bool = False
    seed: int = 0

    def resolved(self, n: int) -> "GrlConfig":
        d1, d2 = default_widths(n)
        cfg = GrlConfig(**self.__dict__)
        cfg.d1 = self.d1 or d1
        cfg.d2 = self.d2 or (math.ceil(cfg.d1 / 2) if self.d1 else d2)
        if self.C <= 0:
            raise ValueError("C must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        return cfg


def init_grl_params(n: int, d1: int, d2: int, seed) -> ParamStore:
    params = ParamStore(seed)
    params.add_glorot("embed", n, d1)
    for k, (din, dout) in enumerate([(d1, d1), (d1, d1), (d1, d2)], start=1):
        params.add_glorot(f"gat{k}_w", din, dout)
        params.add_glorot(f"gat{k}_a", 2 * dout, 1)
    params.add_glorot("head", d2, 1)
    # decoder: d = d_h = d2
    params.add_glorot("phi1", d2, d2)
    params.add_glorot("phi2", d2, d2)
    params.add_glorot("phi3", d2, n)
    return params


def grl_encode(mask: np.ndarray, params: ParamStore) -> tuple[Tensor, Tensor]:
    """Three GAT layers (ELU between) -> features mu (n x d2) and sigmoid-head probabilities."""
    h = ad.elu(ad.gat_forward(mask, params["embed"], params["gat1_w"], params["gat1_a"]))
    h = ad.elu(ad.gat_forward(mask, h, params["gat2_w"], params["gat2_a"]))
    mu = ad.gat_forward(mask, h, params["gat3_w"], params["gat3_a"])
    return mu, ad.sigmoid(ad.matmul(mu, params["head"]))


def decoder_scores(nodes, xv_rows: np.ndarray, mu: Tensor, nbr_mu: Tensor, params: ParamStore,
                   C: float) -> Tensor:
    """gamma for each of ``nodes`` given the labeled-indicator rows in ``xv_rows``.

    gamma_i = C tanh( (mu_i phi1^T) . (X_v phi3^T + sum_{j in N(i)} mu_j phi2^T) / sqrt(d_h) )
    ``nbr_mu`` is A @ mu (plain adjacency, no self term).
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    dh = params["phi1"].shape[0]
    key = ad.matmul(ad.take_rows(mu, nodes), ad.transpose(params["phi1"]))
    ctx = ad.add(ad.matmul(np.asarray(xv_rows, dtype=np.float64), ad.transpose(params["phi3"])),
                 ad.matmul(ad.take_rows(nbr_mu, nodes), ad.transpose(params["phi2"])))
    score = ad.sum_(ad.mul(key, ctx), axis=1)
    return ad.scale(ad.tanh(ad.scale(score, 1.0 / math.sqrt(dh))), C)


def decoder_attention(i: int, mu: Tensor, xv: np.ndarray, params: ParamStore, g: Graph,
                      C: float = 10.0) -> Tensor:
    """gamma_i for a single unselected node, as a (1, 1) tensor."""
    xv = np.asarray(xv)
    if xv[i]:
        raise ValueError(f"node {i} is already selected")
    nbr_mu = ad.const_matmul(ad.operator(g.adjacency), mu)
    return decoder_scores([i], xv[None, :], mu, nbr_mu, params, C)


def step_reward(q: QuboMatrix, i: int, x: np.ndarray, labeled: np.ndarray) -> int:
    """Q terms that become computable once node ``i`` is labeled (diagonal included)."""
    xi = int(x[i])
    if not xi:
        return 0
    r = 0
    for j, coef in q.terms_by_node[i]:
        if j == i:
            r += coef
        elif labeled[j]:
            r += coef * int(x[j])
    return r


def episode_rewards(q: QuboMatrix, order, labels) -> list[int]:
    x = np.zeros(q.n, dtype=np.int64)
    labeled = np.zeros(q.n, dtype=bool)
    out = []
    for i, lab in zip(order, labels):
        x[i] = lab
        labeled[i] = True
        out.append(step_reward(q, i, x, labeled))
    return out


@dataclass
class EpisodeRecord:
    order: np.ndarray           # a^1..a^n
    labels: np.ndarray          # label given at each step
    rewards: np.ndarray         # r^t
    action_probs: np.ndarray    # P(a^t)
    snapshots: np.ndarray       # selections made when a^t's gamma was last computed
    assignment: np.ndarray
    gamma_log: list = field(default_factory=list)

    @property
    def total_reward(self) -> int:
        return int(self.rewards.sum())


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def greedy_decode(g: Graph, q: QuboMatrix, mu: np.ndarray, init_probs: np.ndarray,
                  params: ParamStore, C: float = 10.0, beta: float = 0.5,
                  record_gammas: bool = False) -> EpisodeRecord:
    """Label every node once, highest gamma first (ties to the lowest index).

    Step one takes the node with the highest encoder probability. After each
    selection only the unselected neighbors of that node get fresh scores.
    """
    n = g.n
    mu = np.asarray(mu)
    p0 = np.asarray(init_probs).reshape(-1)
    phi1, phi2, phi3 = (params[k].data for k in ("phi1", "phi2", "phi3"))
    root_dh = math.sqrt(phi1.shape[0])
    key = mu @ phi1.T
    nbr = (g.adjacency @ mu) @ phi2.T
    xphi = np.zeros(phi1.shape[0])
    nbrs = g.neighbors

    x = np.zeros(n, dtype=np.int64)
    labeled = np.zeros(n, dtype=bool)
    order = np.empty(n, dtype=np.int64)
    labels = np.empty(n, dtype=np.int64)
    rewards = np.empty(n, dtype=np.int64)
    probs = np.empty(n)
    snaps = np.zeros(n, dtype=np.int64)
    gamma = np.full(n, -np.inf)
    version = np.zeros(n, dtype=np.int64)
    computed_at = np.zeros(n, dtype=np.int64)
    heap: list[tuple[float, int, int]] = []
    log = []

    def select(t: int, i: int, p1: float):
        lab = int(p1 >= beta)
        x[i] = lab
        labeled[i] = True
        order[t], labels[t] = i, lab
        probs[t] = p1 if lab else 1.0 - p1
        rewards[t] = step_reward(q, i, x, labeled)

    def rescore(nodes: np.ndarray, t_done: int):
        if nodes.size == 0:
            return
        s = np.sum(key[nodes] * (xphi + nbr[nodes]), axis=1) / root_dh
        gamma[nodes] = C * np.tanh(s)
        computed_at[nodes] = t_done
        for i, gi in zip(nodes.tolist(), gamma[nodes].tolist()):
            version[i] += 1
            heapq.heappush(heap, (-gi, i, int(version[i])))

    first = int(np.argmax(p0))
    select(0, first, float(p0[first]))
    xphi += phi3[:, first]
    rescore(np.flatnonzero(~labeled), 1)

    for t in range(1, n):
        while True:
            neg_g, i, ver = heapq.heappop(heap)
            if not labeled[i] and ver == version[i]:
                break
        if record_gammas:
            log.append((i, gamma[i], gamma[~labeled].copy(), np.flatnonzero(~labeled)))
        snaps[t] = computed_at[i]
        select(t, i, float(_sigmoid(gamma[i])))
        xphi += phi3[:, i]
        nb = np.fromiter((j for j in nbrs[i] if not labeled[j]), dtype=np.int64)
        rescore(nb, t + 1)

    return EpisodeRecord(order, labels, rewards, probs, snaps, x, log)


def action_probabilities(episode: EpisodeRecord, mu: Tensor, init_probs: Tensor,
                         nbr_mu: Tensor, params: ParamStore, C: float) -> Tensor:
    """P(a^t) for every step, rebuilt on the tape from the decode trace; shape (n, 1)."""
    n = episode.order.size
    first = ad.take_rows(init_probs.data.reshape(-1, 1) if not isinstance(init_probs, Tensor)
                         else init_probs, episode.order[:1])
    if n > 1:
        xv = np.zeros((n - 1, n))
        for k, s in enumerate(episode.snapshots[1:].tolist()):
            xv[k, episode.order[:s]] = 1.0
        gam = decoder_scores(episode.order[1:], xv, mu, nbr_mu, params, C)
        p1 = ad.sigmoid(gam)
        allp = _concat_rows(first, p1)
    else:
        allp = first
    lab = episode.labels.reshape(-1, 1).astype(np.float64)
    # label 1 -> p, label 0 -> 1 - p
    return ad.add(ad.mul(allp, 2.0 * lab - 1.0), 1.0 - lab)


def _concat_rows(a: Tensor, b: Tensor) -> Tensor:
    na = a.shape[0]
    return ad._record(np.concatenate([a.data, b.data], axis=0), (a, b),
                      lambda g: (g[:na], g[na:]))


def grl_loss(episode: EpisodeRecord, action_probs: Tensor | None = None,
             log_prob: bool = False) -> Tensor:
    """sum_t r^t * P(a^t) (baseline 0); with ``log_prob`` uses log P(a^t)."""
    if action_probs is None:
        action_probs = Tensor(episode.action_probs.reshape(-1, 1))
    if action_probs.data.size != episode.rewards.size or episode.rewards.size != episode.assignment.size:
        raise ValueError("incomplete episode")
    r = episode.rewards.reshape(-1, 1).astype(np.float64)
    term = ad.log(action_probs) if log_prob else action_probs
    return ad.sum_(ad.mul(term, r))


TRACE_COLUMNS = ("epoch", "total_reward", "loss", "best_so_far")


def train_grl(g: Graph, cfg: GrlConfig | None = None, q: QuboMatrix | None = None,
              on_episode=None) -> SolveResult:
    cfg = (cfg or GrlConfig()).resolved(g.n)
    q = build_maxcut_qubo(g) if q is None else q
    mask = ad.attention_mask(g)
    adj_op = ad.operator(g.adjacency)
    params = init_grl_params(g.n, cfg.d1, cfg.d2, cfg.seed)
    monitor = StopMonitor("fuzzy", cfg.patience, direction="maximize")

    best_x, best_r = None, None
    trace, millis = [], []
    stop_reason = "max_epochs"
    t0 = time.perf_counter()
    epoch = 0
    while epoch < cfg.max_epochs:
        epoch += 1
        mu, p0 = grl_encode(mask, params)
        ep = greedy_decode(g, q, mu.data, p0.data, params, cfg.C, cfg.beta)
        if on_episode is not None:
            on_episode(epoch, ep)
        nbr_mu = ad.const_matmul(adj_op, mu, op_t=adj_op)
        probs = action_probabilities(ep, mu, p0, nbr_mu, params, cfg.C)
        objective = grl_loss(ep, probs, cfg.log_prob)
        value = check_finite(objective.item(), "loss", epoch)
        params.backward(ad.neg(objective))
        ad.adam_step(params, cfg.lr)

        total = ep.total_reward
        if best_r is None or total > best_r:
            best_x, best_r = ep.assignment.copy(), total
        trace.append((epoch, total, value, best_r))
        millis.append((time.perf_counter() - t0) * 1e3)
        if monitor.update(total):
            stop_reason = "fuzzy_patience"
            break

    if best_r != evaluate_hamiltonian(q, best_x):
        raise AssertionError("episode rewards do not sum to the Hamiltonian")
    return SolveResult(
        solver="grl",
        best_assignment=best_x,
        best_value=best_r,
        epochs=epoch,
        stop_reason=stop_reason,
        trace_columns=TRACE_COLUMNS,
        trace=trace,
        trace_millis=millis,
        seconds=time.perf_counter() - t0,
    )

"""PI-GNN: two GCN layers + sigmoid head trained on the relaxed QUBO Hamiltonian."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .graph import Graph, QuboMatrix, build_maxcut_qubo, evaluate_hamiltonian
from .result import SolveResult, check_finite
from .stopping import StopMonitor


def default_widths(n: int) -> tuple[int, int]:
    """d1 = ceil(sqrt n) (cube root from 1e5 nodes on), d2 = ceil(d1 / 2)."""
    d1 = math.ceil(round(n ** (1 / 3), 9)) if n >= 100_000 else math.isqrt(n - 1) + 1
    return d1, math.ceil(d1 / 2)


@dataclass
class PignnConfig:
    d1: int | None = None
    d2: int | None = None
    lr: float = 1e-4
    patience: int = 100
    stop_mode: str = "fuzzy"
    tol: float = 1e-4
    beta: float = 0.5
    max_epochs: int = 100_000
    dropout: float = 0.0
    self_loops: bool = False
    seed: int = 0

    def resolved(self, n: int) -> "PignnConfig":
        d1, d2 = default_widths(n)
        cfg = PignnConfig(**{**self.__dict__})
        cfg.d1 = self.d1 or d1
        cfg.d2 = self.d2 or (math.ceil(cfg.d1 / 2) if self.d1 else d2)
        cfg.validate()
        return cfg

    def validate(self):
        if not (self.d1 and self.d2 and self.d1 >= self.d2 >= 1):
            raise ValueError(f"need d1 >= d2 >= 1, got d1={self.d1} d2={self.d2}")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


def init_pignn_params(n: int, d1: int, d2: int, seed) -> ParamStore:
    params = ParamStore(seed)
    params.add_glorot("embed", n, d1)
    params.add_glorot("gcn1", d1, d1)
    params.add_glorot("gcn2", d1, d2)
    params.add_glorot("head", d2, 1)
    return params


def pignn_forward(adj: ad.NormalizedAdjacency, params: ParamStore, dropout: float = 0.0,
                  rng: np.random.Generator | None = None) -> Tensor:
    """Embeddings -> GCN -> ELU -> dropout -> GCN -> scalar head -> sigmoid, shape (n, 1)."""
    h = ad.gcn_forward(adj, params["embed"], params["gcn1"])
    h = ad.dropout(ad.elu(h), dropout, rng)
    h = ad.gcn_forward(adj, h, params["gcn2"])
    return ad.sigmoid(ad.matmul(h, params["head"]))


def pignn_loss(q: QuboMatrix, probs: Tensor, sym=None) -> Tensor:
    """-sum_{i<=j} P_i Q_ij P_j."""
    if probs.data.size != q.n:
        raise ValueError(f"dimension mismatch: Q is {q.n}, probabilities {probs.data.size}")
    sym = ad.operator(q.symmetric) if sym is None else sym
    return ad.neg(ad.quadratic_form(probs, sym))


def project(probs, beta: float = 0.5) -> np.ndarray:
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    p = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    return (p.reshape(-1) >= beta).astype(np.int64)


TRACE_COLUMNS = ("epoch", "loss", "projected_hamiltonian", "best_so_far")


def train_pignn(g: Graph, cfg: PignnConfig | None = None, q: QuboMatrix | None = None) -> SolveResult:
    cfg = (cfg or PignnConfig()).resolved(g.n)
    q = build_maxcut_qubo(g) if q is None else q
    adj = ad.normalize_adjacency(g, cfg.self_loops)
    sym = ad.operator(q.symmetric)
    params = init_pignn_params(g.n, cfg.d1, cfg.d2, cfg.seed)
    drop_rng = np.random.default_rng([cfg.seed, 1]) if cfg.dropout > 0 else None
    monitor = StopMonitor(cfg.stop_mode, cfg.patience, cfg.tol, "minimize")

    best_x, best_h, prev_x, h = None, None, None, None
    least_loss, least_x, least_h = math.inf, None, None
    trace, millis = [], []
    stop_reason = "max_epochs"
    t0 = time.perf_counter()
    epoch = 0
    while epoch < cfg.max_epochs:
        epoch += 1
        probs = pignn_forward(adj, params, cfg.dropout, drop_rng)
        loss = pignn_loss(q, probs, sym)
        value = check_finite(loss.item(), "loss", epoch)
        params.backward(loss)
        ad.adam_step(params, cfg.lr)

        x = project(probs, cfg.beta)
        if prev_x is None or not np.array_equal(x, prev_x):
            h, prev_x = evaluate_hamiltonian(q, x), x
        if best_h is None or h > best_h:
            best_x, best_h = x, h
        if value < least_loss:
            least_loss, least_x, least_h = value, x, h
        trace.append((epoch, value, h, best_h))
        millis.append((time.perf_counter() - t0) * 1e3)
        if monitor.update(value):
            stop_reason = f"{cfg.stop_mode}_patience"
            break

    return SolveResult(
        solver="pignn",
        best_assignment=best_x,
        best_value=best_h,
        epochs=epoch,
        stop_reason=stop_reason,
        trace_columns=TRACE_COLUMNS,
        trace=trace,
        trace_millis=millis,
        seconds=time.perf_counter() - t0,
        extras={
            "least_loss": least_loss,
            "least_loss_value": least_h,
            "least_loss_assignment": "".join(map(str, least_x.tolist())),
        },
    )

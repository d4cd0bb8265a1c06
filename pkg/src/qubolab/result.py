from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NumericalError(RuntimeError):
    """Training produced a non-finite loss or probability."""


@dataclass
class SolveResult:
    """Outcome of one solver run.

    ``trace`` holds one row per epoch (or MCTS iteration) with columns named by
    ``trace_columns``. Wall-clock per row lives in ``trace_millis`` so the trace
    itself stays reproducible.
    """

    solver: str
    best_assignment: np.ndarray
    best_value: int
    epochs: int
    stop_reason: str
    trace_columns: tuple[str, ...] = ()
    trace: list[tuple] = field(default_factory=list)
    trace_millis: list[float] = field(default_factory=list)
    seconds: float = 0.0
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        """Deterministic key/value summary (no wall-clock fields)."""
        out = {
            "solver": self.solver,
            "best_value": int(self.best_value),
            "best_assignment": "".join(str(int(b)) for b in self.best_assignment),
            "epochs": int(self.epochs),
            "stop_reason": self.stop_reason,
        }
        out.update(self.extras)
        return out


def check_finite(value: float, what: str, epoch: int) -> float:
    if not np.isfinite(value):
        raise NumericalError(f"non-finite {what} ({value}) at epoch {epoch}")
    return value

"""Early stopping: strict (per-step delta) and fuzzy (best-so-far) monitors.

Strict mode keeps one counter of "bad" epochs, where an epoch is bad if it did
not improve on its immediate predecessor or moved by less than ``tol``; any
other epoch resets the counter. Fuzzy mode ignores the tolerance and counts
epochs since the best value was last strictly beaten.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

Mode = Literal["strict", "fuzzy"]
Direction = Literal["minimize", "maximize"]


@dataclass
class StopMonitor:
    mode: Mode = "fuzzy"
    patience: int = 100
    tol: float = 1e-4
    direction: Direction = "minimize"
    best: float | None = field(default=None, init=False)
    previous: float | None = field(default=None, init=False)
    counter: int = field(default=0, init=False)
    epochs: int = field(default=0, init=False)
    stopped: bool = field(default=False, init=False)

    def __post_init__(self):
        if self.mode not in ("strict", "fuzzy"):
            raise ValueError(f"unknown stop mode {self.mode!r}")
        if self.direction not in ("minimize", "maximize"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")

    def _better(self, a: float, b: float) -> bool:
        return a < b if self.direction == "minimize" else a > b

    def update(self, value: float) -> bool:
        """Feed one epoch's value; return True once the stop condition holds."""
        self.epochs += 1
        if self.mode == "strict":
            stop = self._feed_strict(value)
        else:
            stop = self._feed_fuzzy(value)
        if self.best is None or self._better(value, self.best):
            self.best = value
        self.previous = value
        self.stopped = self.stopped or stop
        return stop

    def _feed_strict(self, value: float) -> bool:
        prev = self.previous
        if prev is None:
            return False
        if not self._better(value, prev) or abs(value - prev) < self.tol:
            self.counter += 1
        else:
            self.counter = 0
        return self.counter >= self.patience

    def _feed_fuzzy(self, value: float) -> bool:
        if self.best is None:
            return False
        if self._better(value, self.best):
            self.counter = 0
        else:
            self.counter += 1
        return self.counter >= self.patience


def strict_should_stop(monitor: StopMonitor, value: float) -> bool:
    if monitor.mode != "strict":
        raise ValueError("monitor is not in strict mode")
    return monitor.update(value)


def fuzzy_should_stop(monitor: StopMonitor, value: float) -> bool:
    if monitor.mode != "fuzzy":
        raise ValueError("monitor is not in fuzzy mode")
    return monitor.update(value)

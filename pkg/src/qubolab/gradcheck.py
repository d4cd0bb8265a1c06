"""Central finite differences against the tape's analytic gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .autodiff import ParamStore, Tensor


def numerical_gradients(params: ParamStore, loss_fn: Callable[[], Tensor],
                        step: float = 1e-5) -> dict[str, np.ndarray]:
    out = {}
    with params.tape.no_grad():
        for name in params.names():
            data = params[name].data
            grad = np.zeros_like(data)
            for idx in np.ndindex(data.shape):
                orig = data[idx]
                data[idx] = orig + step
                up = loss_fn().item()
                data[idx] = orig - step
                down = loss_fn().item()
                data[idx] = orig
                grad[idx] = (up - down) / (2 * step)
            out[name] = grad
    return out


def analytic_gradients(params: ParamStore, loss_fn: Callable[[], Tensor]) -> dict[str, np.ndarray]:
    params.zero_grad()
    params.backward(loss_fn())
    grads = {name: params.grad(name).copy() for name in params.names()}
    params.zero_grad()
    return grads


def relative_errors(params: ParamStore, loss_fn: Callable[[], Tensor],
                    step: float = 1e-5) -> dict[str, float]:
    """Per-slot ||analytic - numeric|| / max(||analytic||, ||numeric||)."""
    ana = analytic_gradients(params, loss_fn)
    num = numerical_gradients(params, loss_fn, step)
    errs = {}
    for name in params.names():
        scale = max(np.linalg.norm(ana[name]), np.linalg.norm(num[name]))
        errs[name] = 0.0 if scale == 0 else float(np.linalg.norm(ana[name] - num[name]) / scale)
    return errs

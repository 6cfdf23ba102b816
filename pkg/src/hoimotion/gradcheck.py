"""Central finite differences against tape gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autodiff import Tape, Tensor


@dataclass
class GroupError:
    name: str
    size: int
    max_abs: float
    rel: float  # max |analytic - numeric| / max |numeric|


def numeric_grad(loss_fn: Callable[[], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of ``loss_fn`` w.r.t. every entry of ``x`` (perturbed in place)."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn()
        flat[i] = orig - h
        down = loss_fn()
        flat[i] = orig
        out[i] = (up - down) / (2 * h)
    return g


def analytic_grads(loss_fn: Callable[[], Tensor], params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    for p in params.values():
        p.grad = None
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    return {k: (p.grad if p.grad is not None else np.zeros_like(p.data)) for k, p in params.items()}


def check_gradients(loss_fn: Callable[[], Tensor], params: dict[str, Tensor],
                    h: float = 1e-5) -> list[GroupError]:
    """Compare tape gradients with central differences, one entry per parameter.

    ``loss_fn`` must be deterministic (fixed dropout generator state, if any).
    The relative error of a group is normalized by its largest numeric
    gradient entry, so entries whose true gradient is near zero do not
    amplify rounding noise.
    """
    grads = analytic_grads(loss_fn, params)
    scalar = lambda: float(loss_fn().data)
    report = []
    for name, p in params.items():
        num = numeric_grad(scalar, p.data, h)
        diff = float(np.abs(grads[name] - num).max()) if num.size else 0.0
        scale = float(np.abs(num).max()) if num.size else 0.0
        rel = diff / scale if scale > 0 else diff
        report.append(GroupError(name, p.data.size, diff, rel))
    return report

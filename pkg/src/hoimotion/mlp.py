"""Padding helpers and the three-layer MLPs that embed head and object streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .dct import DctPair, dct_time
from .gcn import uniform_init


def pad_repeat_last(x, T: int) -> Tensor:
    """Extend the trailing axis to length ``T`` by repeating its last entry."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    t = x.shape[-1]
    if t < 1 or t > T:
        raise ShapeError(f"cannot pad a length-{t} sequence to {T}")
    if t == T:
        return x
    last = ad.slice_axis(x, -1, t - 1, t)
    return ad.concat([x] + [last] * (T - t), axis=-1)


@dataclass
class Mlp3:
    w1: Tensor
    b1: Tensor
    ln1_scale: Tensor
    ln1_shift: Tensor
    w2: Tensor
    b2: Tensor
    ln2_scale: Tensor
    ln2_shift: Tensor
    w3: Tensor
    b3: Tensor
    ln3_scale: Tensor
    ln3_shift: Tensor
    dropout_rate: float = 0.5

    @classmethod
    def init(cls, rng, in_dim: int, widths=(128, 128, 16), dtype=np.float64,
             dropout_rate: float = 0.5) -> "Mlp3":
        h1, h2, out = widths
        parts = {}
        for i, (fan_in, width) in enumerate([(in_dim, h1), (h1, h2), (h2, out)], start=1):
            parts[f"w{i}"] = uniform_init(rng, (fan_in, width), fan_in, dtype)
            parts[f"b{i}"] = uniform_init(rng, (width,), fan_in, dtype)
            parts[f"ln{i}_scale"] = Tensor(np.ones(width, dtype), requires_grad=True)
            parts[f"ln{i}_shift"] = Tensor(np.zeros(width, dtype), requires_grad=True)
        return cls(**parts, dropout_rate=dropout_rate)

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w3.shape[1]

    def named_parameters(self):
        for i in (1, 2, 3):
            yield f"w{i}", getattr(self, f"w{i}")
            yield f"b{i}", getattr(self, f"b{i}")
            yield f"ln{i}_scale", getattr(self, f"ln{i}_scale")
            yield f"ln{i}_shift", getattr(self, f"ln{i}_shift")


def mlp_forward(x, mlp: Mlp3, mode: str = "eval", rng=None) -> Tensor:
    """Apply the MLP independently to every row of ``x[..., T, D]``."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.shape[-1] != mlp.in_dim:
        raise ShapeError(f"MLP expects input width {mlp.in_dim}, got {x.shape}")
    h = x
    for i in (1, 2, 3):
        h = ad.add_bias(ad.matmul(h, getattr(mlp, f"w{i}")), getattr(mlp, f"b{i}"))
        h = ad.layer_norm(h, getattr(mlp, f"ln{i}_scale"), getattr(mlp, f"ln{i}_shift"))
        h = ad.tanh(h)
        if i < 3:
            h = ad.dropout(h, mlp.dropout_rate, mode, rng)
    return h


def _swap_last2(x: Tensor) -> Tensor:
    k = x.ndim - 2
    return ad.permute(x, tuple(range(k)) + (k + 1, k))


def extract_head_features(head, pair: DctPair, mlp: Mlp3, mode: str = "eval", rng=None) -> Tensor:
    """``[..., 3, t] -> [..., 16, T]``"""
    head = head if isinstance(head, Tensor) else Tensor(head)
    if head.ndim < 2 or head.shape[-2] != 3:
        raise ShapeError(f"head sequence must be [..., 3, t], got {head.shape}")
    h = dct_time(pad_repeat_last(head, pair.size), pair)
    return _swap_last2(mlp_forward(_swap_last2(h), mlp, mode, rng))


def flatten_objects(x: Tensor) -> Tensor:
    """``[..., 3, 8, k, T] -> [..., T, 24k]`` with index ``obj*24 + vertex*3 + coord``."""
    k = x.ndim - 4
    lead = x.shape[:k]
    T, n_obj = x.shape[-1], x.shape[-2]
    y = ad.permute(x, tuple(range(k)) + (k + 3, k + 2, k + 1, k))
    return ad.reshape(y, lead + (T, n_obj * 24))


def unflatten_objects(flat: np.ndarray) -> np.ndarray:
    """Inverse of :func:`flatten_objects` on plain arrays."""
    lead = flat.shape[:-2]
    T, width = flat.shape[-2:]
    y = flat.reshape(lead + (T, width // 24, 8, 3))
    k = len(lead)
    return np.transpose(y, tuple(range(k)) + (k + 3, k + 2, k + 1, k))


def extract_object_features(boxes, pair: DctPair, mlp: Mlp3, mode: str = "eval", rng=None) -> Tensor:
    """``[..., 3, 8, k, t] -> [..., 16, T]``"""
    boxes = boxes if isinstance(boxes, Tensor) else Tensor(boxes)
    if boxes.ndim < 4 or boxes.shape[-4:-2] != (3, 8):
        raise ShapeError(f"object boxes must be [..., 3, 8, k, t], got {boxes.shape}")
    if 24 * boxes.shape[-2] != mlp.in_dim:
        raise ShapeError(
            f"object MLP expects {mlp.in_dim // 24} boxes per frame, got {boxes.shape[-2]}"
        )
    b = dct_time(pad_repeat_last(boxes, pair.size), pair)
    return _swap_last2(mlp_forward(flatten_objects(b), mlp, mode, rng))

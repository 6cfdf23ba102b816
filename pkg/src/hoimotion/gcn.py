"""Temporal / spatial graph convolutions and the encoder, residual and decoder blocks.

Feature tensors are laid out ``[..., C, S, L]`` (channels, graph nodes, time)
with optional leading batch axes. Inside a block the tensor is permuted to
``[..., L, S, C]`` so the channel weight and layer norm act on the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor


def uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype=np.float64, name=None) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    data = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return Tensor(data, requires_grad=True, name=name, dtype=dtype)


def _swap_outer(x: Tensor) -> Tensor:
    """Reverse the last three axes: ``[..., a, b, c] -> [..., c, b, a]``."""
    k = x.ndim - 3
    return ad.permute(x, tuple(range(k)) + (k + 2, k + 1, k))


def tgcn_apply(x, a_t) -> Tensor:
    """out[..., c, s, i] = sum_j x[..., c, s, j] * a_t[j, i]"""
    x = x if isinstance(x, Tensor) else Tensor(x)
    a_t = a_t if isinstance(a_t, Tensor) else Tensor(a_t)
    if a_t.ndim != 2 or a_t.shape[0] != a_t.shape[1]:
        raise ShapeError(f"temporal adjacency must be square, got {a_t.shape}")
    if x.shape[-1] != a_t.shape[0]:
        raise ShapeError(f"tgcn: time axis {x.shape[-1]} != adjacency size {a_t.shape[0]}")
    return ad.matmul(x, a_t)


def sgcn_apply(x, a_s) -> Tensor:
    """out[..., l, :, c] = a_s @ x[..., l, :, c]"""
    x = x if isinstance(x, Tensor) else Tensor(x)
    a_s = a_s if isinstance(a_s, Tensor) else Tensor(a_s)
    if a_s.ndim != 2 or a_s.shape[0] != a_s.shape[1]:
        raise ShapeError(f"spatial adjacency must be square, got {a_s.shape}")
    if x.ndim < 3 or x.shape[-2] != a_s.shape[0]:
        raise ShapeError(f"sgcn: node axis of {x.shape} != adjacency size {a_s.shape[0]}")
    return ad.matmul(a_s, x)


@dataclass
class GcnComponent:
    a_t: Tensor
    w: Tensor
    a_s: Tensor
    ln_scale: Tensor
    ln_shift: Tensor
    dropout_rate: float = 0.3

    @classmethod
    def init(cls, rng, feature_dim: int, n_nodes: int, length: int, dtype=np.float64,
             dropout_rate: float = 0.3) -> "GcnComponent":
        return cls(
            a_t=uniform_init(rng, (length, length), length, dtype),
            w=uniform_init(rng, (feature_dim, feature_dim), feature_dim, dtype),
            a_s=uniform_init(rng, (n_nodes, n_nodes), n_nodes, dtype),
            ln_scale=Tensor(np.ones(feature_dim, dtype), requires_grad=True),
            ln_shift=Tensor(np.zeros(feature_dim, dtype), requires_grad=True),
            dropout_rate=dropout_rate,
        )

    def named_parameters(self):
        yield "a_t", self.a_t
        yield "w", self.w
        yield "a_s", self.a_s
        yield "ln_scale", self.ln_scale
        yield "ln_shift", self.ln_shift


@dataclass
class EncoderGcn:
    a_t: Tensor
    w_start: Tensor
    a_s: Tensor

    @classmethod
    def init(cls, rng, n_joints: int, length: int, feature_dim: int = 16, dtype=np.float64):
        return cls(
            a_t=uniform_init(rng, (length, length), length, dtype),
            w_start=uniform_init(rng, (3, feature_dim), 3, dtype),
            a_s=uniform_init(rng, (n_joints, n_joints), n_joints, dtype),
        )

    def named_parameters(self):
        yield "a_t", self.a_t
        yield "w_start", self.w_start
        yield "a_s", self.a_s


@dataclass
class DecoderGcn:
    a_t: Tensor
    w_end: Tensor
    a_s: Tensor

    @classmethod
    def init(cls, rng, n_nodes: int, length: int, feature_dim: int = 16, dtype=np.float64):
        return cls(
            a_t=uniform_init(rng, (length, length), length, dtype),
            w_end=uniform_init(rng, (feature_dim, 3), feature_dim, dtype),
            a_s=uniform_init(rng, (n_nodes, n_nodes), n_nodes, dtype),
        )

    def named_parameters(self):
        yield "a_t", self.a_t
        yield "w_end", self.w_end
        yield "a_s", self.a_s


def _linear_block(x: Tensor, a_t: Tensor, w: Tensor, a_s: Tensor) -> Tensor:
    y = tgcn_apply(x, a_t)
    y = _swap_outer(y)
    y = ad.matmul(y, w)
    y = sgcn_apply(y, a_s)
    return _swap_outer(y)


def encoder_forward(p_dct, enc: EncoderGcn) -> Tensor:
    """``[..., 3, n, T] -> [..., 16, n, T]``; linear, no activation."""
    p_dct = p_dct if isinstance(p_dct, Tensor) else Tensor(p_dct)
    if p_dct.ndim < 3 or p_dct.shape[-3] != enc.w_start.shape[0]:
        raise ShapeError(f"encoder expects [..., 3, n, T], got {p_dct.shape}")
    return _linear_block(p_dct, enc.a_t, enc.w_start, enc.a_s)


def decoder_forward(f, dec: DecoderGcn) -> Tensor:
    """``[..., 16, S, T] -> [..., 3, S, T]``; linear, no activation."""
    f = f if isinstance(f, Tensor) else Tensor(f)
    if f.ndim < 3 or f.shape[-3] != dec.w_end.shape[0]:
        raise ShapeError(f"decoder expects [..., {dec.w_end.shape[0]}, S, T], got {f.shape}")
    return _linear_block(f, dec.a_t, dec.w_end, dec.a_s)


def component_forward(x: Tensor, comp: GcnComponent, mode: str, rng=None) -> Tensor:
    y = tgcn_apply(x, comp.a_t)
    y = _swap_outer(y)
    y = ad.matmul(y, comp.w)
    y = sgcn_apply(y, comp.a_s)
    y = ad.layer_norm(y, comp.ln_scale, comp.ln_shift)
    y = ad.tanh(y)
    y = ad.dropout(y, comp.dropout_rate, mode, rng)
    y = _swap_outer(y)
    return ad.add(y, x)


def residual_stack_forward(f, components: list[GcnComponent], mode: str = "eval", rng=None) -> Tensor:
    """Copy along time to 2T, run the residual components, keep the first T steps."""
    f = f if isinstance(f, Tensor) else Tensor(f)
    if not components:
        return f
    T = f.shape[-1]
    for i, comp in enumerate(components):
        if comp.a_t.shape[0] != 2 * T or comp.a_s.shape[0] != f.shape[-2] or comp.w.shape[0] != f.shape[-3]:
            raise ShapeError(
                f"component {i} sized for L={comp.a_t.shape[0]}, S={comp.a_s.shape[0]}, "
                f"C={comp.w.shape[0]}; input is {f.shape} (needs L=2T={2 * T})"
            )
    x = ad.concat([f, f], axis=-1)
    for comp in components:
        x = component_forward(x, comp, mode, rng)
    return ad.slice_axis(x, -1, 0, T)

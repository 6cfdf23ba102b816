"""The full forecaster: pose encoder, head/object MLPs, pose-object graph, decoder."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .dct import DctPair, dct_time, idct_time, make_dct_pair
from .gcn import DecoderGcn, EncoderGcn, GcnComponent, decoder_forward, encoder_forward, residual_stack_forward
from .mlp import Mlp3, extract_head_features, extract_object_features, pad_repeat_last


class NonFiniteError(FloatingPointError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    n_joints: int = 21
    t_in: int = 10
    t_total: int = 40
    feature_dim: int = 16
    n_pose_residual: int = 8
    n_fuse_residual: int = 16
    repeat_nodes: int = 5
    objects_per_category: int = 2
    use_head: bool = True
    use_static: bool = True
    use_dynamic: bool = True
    mlp_hidden: int = 128
    gcn_dropout: float = 0.3
    mlp_dropout: float = 0.5
    dtype: str = "float32"

    def __post_init__(self):
        problems = []
        if self.n_joints < 1:
            problems.append(f"n_joints={self.n_joints} must be >= 1")
        if not 1 <= self.t_in < self.t_total:
            problems.append(f"need 1 <= t_in < t_total, got t_in={self.t_in}, t_total={self.t_total}")
        if self.t_total - self.t_in < 2:
            problems.append("need at least 2 future frames for the velocity loss")
        if self.feature_dim < 2:
            problems.append(f"feature_dim={self.feature_dim} must be >= 2 (layer norm)")
        if self.repeat_nodes < 1:
            problems.append(f"repeat_nodes={self.repeat_nodes} must be >= 1")
        if self.objects_per_category < 0:
            problems.append(f"objects_per_category={self.objects_per_category} must be >= 0")
        if self.n_pose_residual < 0 or self.n_fuse_residual < 0:
            problems.append("residual component counts must be >= 0")
        if self.mlp_hidden < 2:
            problems.append(f"mlp_hidden={self.mlp_hidden} must be >= 2")
        if self.dtype not in ("float32", "float64"):
            problems.append(f"dtype must be float32 or float64, got {self.dtype!r}")
        if problems:
            raise ValueError("invalid model config: " + "; ".join(problems))

    @property
    def t_out(self) -> int:
        return self.t_total - self.t_in

    @property
    def dynamic_on(self) -> bool:
        return self.use_dynamic and self.objects_per_category > 0

    @property
    def static_on(self) -> bool:
        return self.use_static and self.objects_per_category > 0

    @property
    def streams(self) -> tuple[str, ...]:
        """Enabled auxiliary streams in fusion order."""
        on = {"head": self.use_head, "dynamic": self.dynamic_on, "static": self.static_on}
        return tuple(name for name in ("head", "dynamic", "static") if on[name])

    @property
    def n_nodes(self) -> int:
        return self.n_joints + self.repeat_nodes * len(self.streams)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ModelParams:
    config: ModelConfig
    encoder: EncoderGcn
    pose_stack: list[GcnComponent]
    head_mlp: Mlp3 | None
    dynamic_mlp: Mlp3 | None
    static_mlp: Mlp3 | None
    fuse_stack: list[GcnComponent]
    decoder: DecoderGcn
    dct: DctPair

    @classmethod
    def init(cls, config: ModelConfig, rng: np.random.Generator | int = 0) -> "ModelParams":
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        c = config
        dtype = np.dtype(c.dtype)
        T, F = c.t_total, c.feature_dim
        widths = (c.mlp_hidden, c.mlp_hidden, F)
        obj_in = 24 * c.objects_per_category

        def mlp(in_dim):
            return Mlp3.init(rng, in_dim, widths, dtype, c.mlp_dropout)

        def stack(count, nodes):
            return [GcnComponent.init(rng, F, nodes, 2 * T, dtype, c.gcn_dropout) for _ in range(count)]

        encoder = EncoderGcn.init(rng, c.n_joints, T, F, dtype)
        pose_stack = stack(c.n_pose_residual, c.n_joints)
        head_mlp = mlp(3) if c.use_head else None
        dynamic_mlp = mlp(obj_in) if c.dynamic_on else None
        static_mlp = mlp(obj_in) if c.static_on else None
        fuse_stack = stack(c.n_fuse_residual, c.n_nodes)
        decoder = DecoderGcn.init(rng, c.n_nodes, T, F, dtype)
        return cls(c, encoder, pose_stack, head_mlp, dynamic_mlp, static_mlp, fuse_stack,
                   decoder, make_dct_pair(T).astype(dtype))

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        yield from (("encoder." + k, v) for k, v in self.encoder.named_parameters())
        for i, comp in enumerate(self.pose_stack):
            yield from ((f"pose_stack.{i}.{k}", v) for k, v in comp.named_parameters())
        for name in ("head_mlp", "dynamic_mlp", "static_mlp"):
            m = getattr(self, name)
            if m is not None:
                yield from ((f"{name}.{k}", v) for k, v in m.named_parameters())
        for i, comp in enumerate(self.fuse_stack):
            yield from ((f"fuse_stack.{i}.{k}", v) for k, v in comp.named_parameters())
        yield from (("decoder." + k, v) for k, v in self.decoder.named_parameters())

    def parameter_dict(self) -> dict[str, Tensor]:
        return dict(self.named_parameters())

    def zero_grad(self) -> None:
        for _, p in self.named_parameters():
            p.grad = None


def count_parameters(params: ModelParams) -> int:
    return sum(p.data.size for _, p in params.named_parameters())


def zero_decoder(params: ModelParams) -> None:
    """Zero the decoder weights so the forecast collapses to the global residual."""
    for p in (params.decoder.a_t, params.decoder.w_end, params.decoder.a_s):
        p.data[...] = 0.0


def _expand_nodes(f: Tensor, repeat: int) -> Tensor:
    """``[..., C, T] -> [..., C, repeat, T]``"""
    f = ad.reshape(f, f.shape[:-1] + (1, f.shape[-1]))
    return ad.concat([f] * repeat, axis=-2) if repeat > 1 else f


def fuse_features(f_pose, f_head, f_dyn, f_stat, cfg: ModelConfig) -> Tensor:
    """Concatenate pose nodes with repeated head / dynamic / static nodes."""
    parts = [f_pose]
    lead = f_pose.shape[:-3]
    C, T = f_pose.shape[-3], f_pose.shape[-1]
    supplied = {"head": f_head, "dynamic": f_dyn, "static": f_stat}
    for name in cfg.streams:
        f = supplied[name]
        if f is None:
            raise ShapeError(f"config enables the {name} stream but no {name} features were given")
        if f.shape != lead + (C, T):
            raise ShapeError(f"{name} features {f.shape} do not match pose features {f_pose.shape}")
        parts.append(_expand_nodes(f, cfg.repeat_nodes))
    return ad.concat(parts, axis=-2) if len(parts) > 1 else f_pose


def _check(x: Tensor, stage: str) -> Tensor:
    if not np.isfinite(x.data).all():
        raise NonFiniteError(f"non-finite values after {stage}")
    return x


def _as_input(x, dtype, what: str) -> Tensor:
    if x is None:
        raise ShapeError(f"model config needs a {what} input")
    if isinstance(x, Tensor):
        x = x.data
    return _check(Tensor(np.asarray(x, dtype=dtype), dtype=dtype), f"{what} input")


def forward(params: ModelParams, pose, head=None, dynamic=None, static=None,
            mode: str = "eval", rng: np.random.Generator | None = None) -> Tensor:
    """Forecast ``[..., 3, n, T - t]`` future poses from ``[..., 3, n, t]`` past poses.

    ``head`` is ``[..., 3, t]``; ``dynamic``/``static`` are ``[..., 3, 8, k, t]``.
    Streams the config disables are ignored.
    """
    cfg = params.config
    dtype = np.dtype(cfg.dtype)
    P = _as_input(pose, dtype, "pose")
    if P.ndim < 3 or P.shape[-3:] != (3, cfg.n_joints, cfg.t_in):
        raise ShapeError(f"pose must be [..., 3, {cfg.n_joints}, {cfg.t_in}], got {P.shape}")
    lead = P.shape[:-3]
    pair = params.dct

    p_pad = pad_repeat_last(P, cfg.t_total)
    f_pose = encoder_forward(dct_time(p_pad, pair), params.encoder)
    f_pose = _check(residual_stack_forward(f_pose, params.pose_stack, mode, rng), "pose residual stack")

    f_head = f_dyn = f_stat = None
    if cfg.use_head:
        H = _as_input(head, dtype, "head")
        if H.shape != lead + (3, cfg.t_in):
            raise ShapeError(f"head must be {lead + (3, cfg.t_in)}, got {H.shape}")
        f_head = _check(extract_head_features(H, pair, params.head_mlp, mode, rng), "head MLP")
    k = cfg.objects_per_category
    if cfg.dynamic_on:
        D = _as_input(dynamic, dtype, "dynamic objects")
        if D.shape != lead + (3, 8, k, cfg.t_in):
            raise ShapeError(f"dynamic objects must be {lead + (3, 8, k, cfg.t_in)}, got {D.shape}")
        f_dyn = _check(extract_object_features(D, pair, params.dynamic_mlp, mode, rng), "dynamic MLP")
    if cfg.static_on:
        S = _as_input(static, dtype, "static objects")
        if S.shape != lead + (3, 8, k, cfg.t_in):
            raise ShapeError(f"static objects must be {lead + (3, 8, k, cfg.t_in)}, got {S.shape}")
        f_stat = _check(extract_object_features(S, pair, params.static_mlp, mode, rng), "static MLP")

    fused = fuse_features(f_pose, f_head, f_dyn, f_stat, cfg)
    g = _check(residual_stack_forward(fused, params.fuse_stack, mode, rng), "fuse residual stack")
    y = idct_time(decoder_forward(g, params.decoder), pair)
    y_pose = ad.slice_axis(y, -2, 0, cfg.n_joints)
    full = _check(ad.add(y_pose, p_pad), "decoder")
    return ad.slice_axis(full, -1, cfg.t_in, cfg.t_total)

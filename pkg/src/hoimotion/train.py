"""Position + velocity losses, Adam, and the mini-batch training loop."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tape, Tensor
from .data import WindowBatch
from .model import ModelConfig, ModelParams, NonFiniteError, forward

log = logging.getLogger(__name__)

NORM_EPS = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 0.01
    lr_decay_per_epoch: float = 0.95
    batch_size: int = 32
    epochs: int = 80
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    squared_loss: bool = False
    boundary_velocity: bool = False

    def __post_init__(self):
        if not self.lr0 > 0:
            raise ValueError(f"lr0 must be positive, got {self.lr0}")
        if not 0 < self.lr_decay_per_epoch <= 1:
            raise ValueError(f"lr_decay_per_epoch must lie in (0, 1], got {self.lr_decay_per_epoch}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    def lr_at(self, epoch: int) -> float:
        return self.lr0 * self.lr_decay_per_epoch ** epoch

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config fields: {sorted(unknown)}")
        return cls(**d)


# --------------------------------------------------------------------------
# losses; tensors are [..., 3, n, F] with coordinates on axis -3


def _joint_error(diff: Tensor, squared: bool) -> Tensor:
    return ad.sum_squares(diff, axis=-3) if squared else ad.norm(diff, axis=-3, eps=NORM_EPS)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def motion_loss(pred, gt, squared: bool = False) -> Tensor:
    """Mean per-joint position error over all joints and future frames."""
    pred, gt = _as_tensor(pred), _as_tensor(gt)
    if pred.shape != gt.shape or pred.ndim < 3 or pred.shape[-3] != 3:
        raise ShapeError(f"motion_loss: prediction {pred.shape} vs ground truth {gt.shape}")
    return ad.mean(_joint_error(ad.sub(pred, gt), squared))


def _velocities(x: Tensor) -> Tensor:
    F = x.shape[-1]
    return ad.sub(ad.slice_axis(x, -1, 1, F), ad.slice_axis(x, -1, 0, F - 1))


def velocity_loss(pred, gt, last_obs=None, squared: bool = False) -> Tensor:
    """Mean per-joint error of frame-to-frame velocities within the forecast.

    With ``last_obs`` ([..., 3, n]) the step from the last observed pose into
    the first forecast frame is included as well.
    """
    pred, gt = _as_tensor(pred), _as_tensor(gt)
    if pred.shape != gt.shape or pred.ndim < 3 or pred.shape[-3] != 3:
        raise ShapeError(f"velocity_loss: prediction {pred.shape} vs ground truth {gt.shape}")
    if pred.shape[-1] < 2:
        raise ShapeError(f"velocity_loss needs at least 2 future frames, got {pred.shape[-1]}")
    if last_obs is not None:
        last = _as_tensor(last_obs)
        if last.shape != pred.shape[:-1]:
            raise ShapeError(f"last_obs {last.shape} does not match {pred.shape[:-1]}")
        last = ad.reshape(last, last.shape + (1,))
        pred, gt = ad.concat([last, pred], axis=-1), ad.concat([last, gt], axis=-1)
    return ad.mean(_joint_error(ad.sub(_velocities(pred), _velocities(gt)), squared))


def total_loss(pred, gt, last_obs=None, squared: bool = False) -> Tensor:
    return ad.add(motion_loss(pred, gt, squared), velocity_loss(pred, gt, last_obs, squared))


# --------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_step(params: dict[str, Tensor], state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, in place. Parameters without a gradient
    are treated as having a zero gradient."""
    if lr < 0:
        raise ValueError(f"learning rate must be non-negative, got {lr}")
    for name, p in params.items():
        if p.grad is not None and not np.isfinite(p.grad).all():
            raise NonFiniteError(f"non-finite gradient for parameter {name!r}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient for {name!r} has shape {g.shape}, parameter {p.data.shape}")
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        p.data -= p.data.dtype.type(lr) * update.astype(p.data.dtype, copy=False)


# --------------------------------------------------------------------------
# loop


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    loss: float


def _batch_loss(params: ModelParams, batch: WindowBatch, cfg: TrainConfig, mode: str, rng) -> Tensor:
    pred = forward(params, batch.pose, batch.head, batch.dynamic, batch.static, mode=mode, rng=rng)
    dtype = pred.dtype
    last = Tensor(batch.pose[..., -1].astype(dtype)) if cfg.boundary_velocity else None
    return total_loss(pred, Tensor(batch.target.astype(dtype)), last, cfg.squared_loss)


def train(dataset: WindowBatch, cfg: TrainConfig, model_cfg: ModelConfig,
          params: ModelParams | None = None, checkpoint_path=None,
          progress=None) -> tuple[ModelParams, list[EpochRecord]]:
    """Train from scratch (or continue ``params``) and return the loss curve.

    All randomness (initialization, shuffling, dropout) derives from
    ``cfg.seed``. ``progress`` is called with each finished :class:`EpochRecord`.
    """
    if len(dataset) == 0:
        raise ValueError("training set is empty")
    if dataset.t_in != model_cfg.t_in or dataset.t_out != model_cfg.t_out:
        raise ShapeError(
            f"windows are {dataset.t_in}-in/{dataset.t_out}-out, model expects "
            f"{model_cfg.t_in}-in/{model_cfg.t_out}-out"
        )
    dataset = dataset.with_objects(model_cfg.objects_per_category)
    init_seq, shuffle_seq, dropout_seq = np.random.SeedSequence(cfg.seed).spawn(3)
    if params is None:
        params = ModelParams.init(model_cfg, np.random.default_rng(init_seq))
    shuffle_rng = np.random.default_rng(shuffle_seq)
    dropout_rng = np.random.default_rng(dropout_seq)
    named = params.parameter_dict()
    state = AdamState()
    history = []
    n = len(dataset)
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        order = shuffle_rng.permutation(n)
        losses, weights = [], []
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            batch = dataset.take(order[start:start + cfg.batch_size])
            params.zero_grad()
            with Tape() as tape:
                loss = _batch_loss(params, batch, cfg, "train", dropout_rng)
            value = float(loss.data)
            if not np.isfinite(value):
                raise NonFiniteError(f"non-finite loss at epoch {epoch}, batch {b}")
            tape.backward(loss)
            adam_step(named, state, lr, cfg.beta1, cfg.beta2, cfg.eps)
            del tape, loss
            losses.append(value)
            weights.append(len(batch))
        rec = EpochRecord(epoch, lr, float(np.average(losses, weights=weights)))
        history.append(rec)
        log.info("epoch %d lr %.6f loss %.6f", rec.epoch, rec.lr, rec.loss)
        if progress is not None:
            progress(rec)
    if checkpoint_path is not None:
        from .checkpoint import save_checkpoint

        save_checkpoint(checkpoint_path, params, meta={"train": dataclasses.asdict(cfg),
                                                       "epochs_done": len(history)})
    return params, history


def format_loss_curve(history: list[EpochRecord]) -> str:
    lines = ["epoch\tlr\ttrain_loss"]
    lines += [f"{r.epoch}\t{r.lr:.10g}\t{r.loss:.10g}" for r in history]
    return "\n".join(lines) + "\n"

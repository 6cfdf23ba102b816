"""Per-horizon MPJPE reports for trained models and trivial baselines."""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
import logging
from dataclasses import dataclass

import numpy as np

from .data import WindowBatch
from .model import ModelConfig, ModelParams, forward
from .train import TrainConfig, train

log = logging.getLogger(__name__)

HORIZONS_MS = tuple(range(100, 1001, 100))


def horizon_frame(ms: int, fps: float = 30.0) -> int:
    """1-based future frame index that a horizon in milliseconds refers to."""
    return int(round(ms * fps / 1000.0))


def per_frame_mpjpe(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """``[..., 3, n, F]`` pairs -> ``[F]`` millimeters, averaged over joints and leading axes."""
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape or pred.ndim < 3 or pred.shape[-3] != 3:
        raise ValueError(f"prediction {pred.shape} vs ground truth {gt.shape}")
    err = np.linalg.norm(pred - gt, axis=-3)  # [..., n, F]
    return 1000.0 * err.reshape(-1, err.shape[-1]).mean(axis=0)


def mpjpe_at(pred: np.ndarray, gt: np.ndarray, k: int) -> float:
    """MPJPE in millimeters at future frame ``k`` (1-based)."""
    F = np.shape(pred)[-1]
    if not 1 <= k <= F:
        raise ValueError(f"frame {k} outside 1..{F}")
    return float(per_frame_mpjpe(np.asarray(pred)[..., k - 1:k], np.asarray(gt)[..., k - 1:k])[0])


@dataclass(frozen=True)
class BaselinePredictor:
    kind: str  # zero_velocity | constant_velocity

    def __post_init__(self):
        if self.kind not in ("zero_velocity", "constant_velocity"):
            raise ValueError(f"unknown baseline {self.kind!r}")

    def predict(self, pose: np.ndarray, t_out: int) -> np.ndarray:
        """``[..., 3, n, t]`` history -> ``[..., 3, n, t_out]`` forecast."""
        last = pose[..., -1:]
        if self.kind == "zero_velocity" or pose.shape[-1] < 2:
            return np.repeat(last, t_out, axis=-1)
        step = pose[..., -1:] - pose[..., -2:-1]
        return last + step * np.arange(1, t_out + 1, dtype=pose.dtype)


@dataclass
class ForecastReport:
    tag: str
    horizons_ms: tuple[int, ...]
    horizon_mpjpe: tuple[float, ...]
    average: float
    per_frame: tuple[float, ...]
    samples: int
    fingerprint: str

    def to_record(self) -> dict:
        return {
            "tag": self.tag,
            "fingerprint": self.fingerprint,
            "samples": self.samples,
            "horizons_ms": list(self.horizons_ms),
            "mpjpe_mm": [float(v) for v in self.horizon_mpjpe],
            "average_mm": float(self.average),
            "per_frame_mm": [float(v) for v in self.per_frame],
        }

    @classmethod
    def from_record(cls, d: dict) -> "ForecastReport":
        return cls(d["tag"], tuple(d["horizons_ms"]), tuple(d["mpjpe_mm"]), d["average_mm"],
                   tuple(d["per_frame_mm"]), d["samples"], d["fingerprint"])


def format_table(reports: list[ForecastReport]) -> str:
    """Aligned text table: method, one column per horizon, average."""
    if not reports:
        return ""
    header = ["Method"] + [f"{h} ms" for h in reports[0].horizons_ms] + ["Average"]
    rows = [[r.tag] + [f"{v:.1f}" for v in r.horizon_mpjpe] + [f"{r.average:.1f}"] for r in reports]
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]
    fmt = lambda row: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
    return "\n".join([fmt(header), "  ".join("-" * w for w in widths)] + [fmt(r) for r in rows]) + "\n"


def config_fingerprint(config: dict, seed: int | None) -> str:
    blob = json.dumps({"config": config, "seed": seed}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def predict(predictor, corpus: WindowBatch, batch_size: int = 256) -> np.ndarray:
    """Eval-mode forecasts for every window in ``corpus``."""
    if isinstance(predictor, BaselinePredictor):
        return predictor.predict(corpus.pose, corpus.t_out)
    cfg = predictor.config
    if corpus.pose.shape[-2] != cfg.n_joints:
        raise ValueError(f"corpus has {corpus.pose.shape[-2]} joints, model expects {cfg.n_joints}")
    corpus = corpus.with_objects(cfg.objects_per_category)
    outs = []
    for s in range(0, len(corpus), batch_size):
        b = corpus.take(np.arange(s, min(s + batch_size, len(corpus))))
        outs.append(forward(predictor, b.pose, b.head, b.dynamic, b.static, mode="eval").data)
    return np.concatenate(outs)


def evaluate(predictor, corpus: WindowBatch, tag: str | None = None, seed: int | None = None,
             fps: float = 30.0, joints=None) -> ForecastReport:
    """Per-horizon and average MPJPE over all windows; ``joints`` restricts the joint set."""
    if len(corpus) == 0:
        raise ValueError("evaluation corpus is empty")
    pred = predict(predictor, corpus)
    gt = corpus.target
    if joints is not None:
        pred, gt = pred[..., joints, :], gt[..., joints, :]
    frames = per_frame_mpjpe(pred, gt)
    F = len(frames)
    horizons = tuple(h for h in HORIZONS_MS if 1 <= horizon_frame(h, fps) <= F)
    values = tuple(float(frames[horizon_frame(h, fps) - 1]) for h in horizons)
    if isinstance(predictor, BaselinePredictor):
        tag = tag or predictor.kind
        fp = config_fingerprint({"baseline": predictor.kind}, seed)
    else:
        tag = tag or "model"
        fp = config_fingerprint(predictor.config.to_dict(), seed)
    return ForecastReport(tag, horizons, values, float(frames.mean()), tuple(float(v) for v in frames),
                          len(corpus), fp)


def _grid_points(grid: dict[str, list]) -> list[dict]:
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def point_tag(point: dict) -> str:
    return ",".join(f"{k}={v}" for k, v in point.items()) or "base"


def run_ablation(grid: dict[str, list], train_corpus: WindowBatch, test_corpus: WindowBatch,
                 base: ModelConfig, train_cfg: TrainConfig) -> list[tuple[dict, ForecastReport]]:
    """Retrain from scratch at every grid point and evaluate it.

    The corpora must carry at least as many objects per category as any grid
    point asks for. Invalid points are logged and skipped.
    """
    results = []
    for point in _grid_points(grid):
        try:
            cfg = dataclasses.replace(base, **point)
        except (TypeError, ValueError) as e:
            log.warning("skipping grid point %s: %s", point_tag(point), e)
            continue
        if cfg.objects_per_category > train_corpus.dynamic.shape[-2]:
            log.warning("skipping grid point %s: corpus has too few objects per category", point_tag(point))
            continue
        params, _ = train(train_corpus, train_cfg, cfg)
        results.append((point, evaluate(params, test_corpus, tag=point_tag(point), seed=train_cfg.seed)))
    return results

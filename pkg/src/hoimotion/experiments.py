"""Scaled synthetic experiments: learning on walk-and-reach, and the object ablation."""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field

from .data import WindowBatch, make_windows, stack_windows, windows_from_sequences
from .evaluate import BaselinePredictor, ForecastReport, evaluate
from .model import ModelConfig
from .synth import ARM_JOINTS, generate_corpus, reach_onset, sample_corpus
from .train import TrainConfig, train

log = logging.getLogger(__name__)

# default depth with narrower object/head MLPs: about six minutes for two epochs on one core
REDUCED_WIDTH = dict(mlp_hidden=32, dtype="float32")
# shallow and narrow, for experiments that train many models
TINY_MODEL = dict(n_pose_residual=1, n_fuse_residual=2, mlp_hidden=32, dtype="float32")


@dataclass(frozen=True)
class LearningSetup:
    n_train: int = 200
    n_test: int = 50
    data_seed: int = 1
    train_stride: int = 10
    test_stride: int = 5
    model: dict = field(default_factory=lambda: dict(REDUCED_WIDTH))
    training: TrainConfig = TrainConfig(epochs=2)


@dataclass
class LearningResult:
    model: ForecastReport
    zero_velocity: ForecastReport
    constant_velocity: ForecastReport
    train_windows: int
    seconds: float

    @property
    def improvement(self) -> float:
        """Fractional reduction of average MPJPE relative to zero velocity."""
        return 1.0 - self.model.average / self.zero_velocity.average


def run_learning(setup: LearningSetup = LearningSetup()) -> LearningResult:
    """Train on walk-and-reach sequences, compare with trivial baselines on held-out ones."""
    start = time.perf_counter()
    train_seqs = generate_corpus(setup.n_train, seed=setup.data_seed)
    test_seqs = generate_corpus(setup.n_test, seed=setup.data_seed + 1)
    train_w = windows_from_sequences(train_seqs, stride=setup.train_stride)
    test_w = windows_from_sequences(test_seqs, stride=setup.test_stride)
    cfg = ModelConfig(**setup.model)
    params, _ = train(train_w, setup.training, cfg,
                      progress=lambda r: log.info("epoch %d loss %.5f", r.epoch, r.loss))
    return LearningResult(
        evaluate(params, test_w, tag="model", seed=setup.training.seed),
        evaluate(BaselinePredictor("zero_velocity"), test_w),
        evaluate(BaselinePredictor("constant_velocity"), test_w),
        len(train_w),
        time.perf_counter() - start,
    )


def pre_reach_windows(pairs, t_in: int = 10, t_out: int = 30, objects_per_category: int = 2) -> WindowBatch:
    """Windows whose observed frames all precede the reach onset."""
    windows = []
    for spec, seq in pairs:
        onset = reach_onset(spec)
        windows += [w for w in make_windows(seq, t_in, t_out, 1, objects_per_category)
                    if w.source[1] + t_in <= onset]
    return stack_windows(windows)


@dataclass(frozen=True)
class AblationSetup:
    n_train: int = 200
    n_test: int = 60
    epochs: int = 10
    model: dict = field(default_factory=lambda: dict(TINY_MODEL))


@dataclass
class AblationResult:
    seed: int
    full: ForecastReport  # arm joints only
    pose_only: ForecastReport
    zero_velocity: ForecastReport

    @property
    def improvement(self) -> float:
        return 1.0 - self.full.average / self.pose_only.average


def run_object_ablation(seed: int, setup: AblationSetup = AblationSetup()) -> AblationResult:
    """Full model vs pose-only model on reaches whose target only the scene reveals.

    The person stands still at the counter during the observed frames, so the
    body pose carries no information about which object is reached for; head
    direction and object boxes do. Data, initialization and dropout all derive
    from ``seed``.
    """
    train_w = pre_reach_windows(sample_corpus(setup.n_train, seed=1000 + seed, scenario="reach"))
    test_w = pre_reach_windows(sample_corpus(setup.n_test, seed=2000 + seed, scenario="reach"))
    full_cfg = ModelConfig(**setup.model)
    pose_cfg = dataclasses.replace(full_cfg, use_head=False, use_static=False, use_dynamic=False)
    tcfg = TrainConfig(epochs=setup.epochs, seed=seed)
    arm = list(ARM_JOINTS)
    reports = {}
    for tag, cfg in (("full", full_cfg), ("pose_only", pose_cfg)):
        params, _ = train(train_w, tcfg, cfg)
        reports[tag] = evaluate(params, test_w, tag=tag, seed=seed, joints=arm)
    zero = evaluate(BaselinePredictor("zero_velocity"), test_w, joints=arm)
    return AblationResult(seed, reports["full"], reports["pose_only"], zero)

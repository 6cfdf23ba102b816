import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hoimotion.data import WindowBatch, windows_from_sequences
from hoimotion.evaluate import (
    HORIZONS_MS, BaselinePredictor, ForecastReport, evaluate, format_table, horizon_frame, mpjpe_at,
    per_frame_mpjpe, run_ablation,
)
from hoimotion.model import ModelConfig, ModelParams, zero_decoder
from hoimotion.synth import generate_corpus
from hoimotion.train import TrainConfig


def batch_from(pose, target, k=2):
    B, _, n, t = pose.shape
    return WindowBatch(pose, np.zeros((B, 3, t)), np.zeros((B, 3, 8, k, t)), np.zeros((B, 3, 8, k, t)), target)


@pytest.fixture(scope="module")
def corpus():
    return windows_from_sequences(generate_corpus(3, seed=9), stride=7)


def test_horizon_frames():
    assert [horizon_frame(h) for h in HORIZONS_MS] == [3, 6, 9, 12, 15, 18, 21, 24, 27, 30]
    assert horizon_frame(100, fps=60) == 6


def test_mpjpe_example_and_loop():
    gt = np.zeros((2, 3, 4, 5))
    pred = gt.copy()
    pred[:, 0] += 0.005
    assert abs(mpjpe_at(pred, gt, 3) - 5.0) < 1e-12
    r = np.random.default_rng(0)
    pred, gt = r.normal(size=(2, 3, 4, 5)), r.normal(size=(2, 3, 4, 5))
    acc = 0.0
    for b in range(2):
        for j in range(4):
            acc += np.sqrt(sum((pred[b, c, j, 1] - gt[b, c, j, 1]) ** 2 for c in range(3)))
    assert abs(mpjpe_at(pred, gt, 2) - 1000 * acc / 8) < 1e-9
    with pytest.raises(ValueError):
        mpjpe_at(pred, gt, 6)
    with pytest.raises(ValueError):
        per_frame_mpjpe(pred, gt[..., :4])


def test_frozen_pose_scores_zero():
    pose = np.repeat(np.random.default_rng(1).normal(size=(4, 3, 5, 1)), 10, axis=-1)
    target = np.repeat(pose[..., -1:], 30, axis=-1)
    rep = evaluate(BaselinePredictor("zero_velocity"), batch_from(pose, target))
    assert rep.average == 0 and all(v == 0 for v in rep.horizon_mpjpe)


def test_report_columns_and_average(corpus):
    rep = evaluate(BaselinePredictor("constant_velocity"), corpus)
    assert rep.horizons_ms == HORIZONS_MS and len(rep.per_frame) == 30
    assert abs(rep.average - np.mean(rep.per_frame)) < 1e-9
    for h, v in zip(rep.horizons_ms, rep.horizon_mpjpe):
        assert v == rep.per_frame[horizon_frame(h) - 1]
    assert rep.samples == len(corpus)


def test_zero_decoder_matches_zero_velocity(corpus):
    p = ModelParams.init(ModelConfig(n_pose_residual=1, n_fuse_residual=1, mlp_hidden=16, dtype="float64"), 0)
    zero_decoder(p)
    a = evaluate(p, corpus)
    b = evaluate(BaselinePredictor("zero_velocity"), corpus)
    assert a.per_frame == b.per_frame


def test_constant_velocity_wins_short_term(corpus):
    cv = evaluate(BaselinePredictor("constant_velocity"), corpus)
    zv = evaluate(BaselinePredictor("zero_velocity"), corpus)
    assert cv.horizon_mpjpe[0] <= zv.horizon_mpjpe[0]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["zero_velocity", "constant_velocity"]))
def test_translation_invariance(seed, kind):
    r = np.random.default_rng(seed)
    pose, target = r.normal(size=(3, 3, 4, 10)), r.normal(size=(3, 3, 4, 30))
    shift = r.normal(size=(1, 3, 1, 1)) * 3
    a = evaluate(BaselinePredictor(kind), batch_from(pose, target))
    b = evaluate(BaselinePredictor(kind), batch_from(pose + shift, target + shift))
    np.testing.assert_allclose(a.per_frame, b.per_frame, atol=1e-9)


def test_baseline_predictions():
    pose = np.arange(4.0).reshape(1, 1, 1, 4) * np.ones((1, 3, 2, 4))
    np.testing.assert_array_equal(BaselinePredictor("constant_velocity").predict(pose, 3)[0, 0, 0], [4, 5, 6])
    np.testing.assert_array_equal(BaselinePredictor("zero_velocity").predict(pose, 3)[0, 0, 0], [3, 3, 3])
    with pytest.raises(ValueError):
        BaselinePredictor("oracle")


def test_record_roundtrip_and_table(corpus):
    rep = evaluate(BaselinePredictor("zero_velocity"), corpus, seed=3)
    back = ForecastReport.from_record(json.loads(json.dumps(rep.to_record())))
    assert back == rep
    text = format_table([rep, dataclasses.replace(rep, tag="other")])
    lines = text.splitlines()
    assert lines[0].split()[0] == "Method" and lines[0].split()[-1] == "Average"
    assert "1000 ms" in lines[0] and len(lines) == 4
    assert rep.fingerprint != evaluate(BaselinePredictor("zero_velocity"), corpus, seed=4).fingerprint


def test_joint_subset(corpus):
    rep = evaluate(BaselinePredictor("zero_velocity"), corpus, joints=[0])
    root = 1000 * np.linalg.norm(corpus.pose[..., 0, -1:] - corpus.target[..., 0, :], axis=1).mean(0)
    np.testing.assert_allclose(rep.per_frame, root, atol=1e-9)


def test_run_ablation_grid(corpus, caplog):
    small = corpus.take(np.arange(4))
    base = ModelConfig(n_pose_residual=1, n_fuse_residual=1, mlp_hidden=8)
    cfg = TrainConfig(epochs=1, seed=2)
    out = run_ablation({"use_dynamic": [True, False]}, small, small, base, cfg)
    assert [p for p, _ in out] == [{"use_dynamic": True}, {"use_dynamic": False}]
    assert len({r.fingerprint for _, r in out}) == 2
    out = run_ablation({"repeat_nodes": [0, 1]}, small, small, base, cfg)
    assert [p for p, _ in out] == [{"repeat_nodes": 1}]
    assert "repeat_nodes=0" in caplog.text


def test_object_count_grid_trains_every_point():
    w = windows_from_sequences(generate_corpus(1, seed=11), stride=40, objects_per_category=5)
    base = ModelConfig(n_pose_residual=0, n_fuse_residual=1, mlp_hidden=4)
    out = run_ablation({"objects_per_category": [0, 1, 2, 3, 4, 5]}, w, w, base, TrainConfig(epochs=1))
    assert [p["objects_per_category"] for p, _ in out] == [0, 1, 2, 3, 4, 5]
    assert len({r.fingerprint for _, r in out}) == 6

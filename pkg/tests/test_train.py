import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from hoimotion import autodiff as ad
from hoimotion.autodiff import ShapeError, Tape, Tensor
from hoimotion.data import windows_from_sequences
from hoimotion.gradcheck import check_gradients
from hoimotion.model import ModelConfig, NonFiniteError
from hoimotion.synth import generate_corpus
from hoimotion.train import (
    AdamState, TrainConfig, adam_step, format_loss_curve, motion_loss, total_loss, train, velocity_loss,
)

SMALL = ModelConfig(n_pose_residual=1, n_fuse_residual=1, mlp_hidden=16, dtype="float64")


def test_loss_examples():
    gt = np.zeros((3, 1, 1))
    pred = np.array([1.0, 2.0, 2.0]).reshape(3, 1, 1)
    assert abs(float(motion_loss(pred, gt).data) - 3.0) < 1e-12
    x = np.random.default_rng(0).normal(size=(3, 4, 5))
    assert float(motion_loss(x, x).data) == 0.0
    assert float(motion_loss(x, x, squared=True).data) == 0.0
    assert float(velocity_loss(x, x).data) == 0.0
    shifted = x + np.array([0.3, -1.0, 2.0])[:, None, None]
    assert float(velocity_loss(shifted, x).data) < 1e-20  # rounding in the differences only
    assert float(velocity_loss(shifted, x, squared=True).data) < 1e-20


def test_losses_match_loop_oracles():
    r = np.random.default_rng(1)
    pred, gt = r.normal(size=(2, 3, 5, 6)), r.normal(size=(2, 3, 5, 6))
    for sq in (False, True):
        assert abs(float(motion_loss(pred, gt, sq).data) - oracles.loop_motion_loss(pred, gt, sq)) < 1e-12
        assert abs(float(velocity_loss(pred, gt, squared=sq).data) - oracles.loop_velocity_loss(pred, gt, sq)) < 1e-12
    tot = float(total_loss(pred, gt).data)
    assert tot == float(motion_loss(pred, gt).data) + float(velocity_loss(pred, gt).data)


def test_boundary_velocity_variant():
    r = np.random.default_rng(2)
    pred, gt, last = r.normal(size=(3, 2, 4)), r.normal(size=(3, 2, 4)), r.normal(size=(3, 2))
    with_last = float(velocity_loss(pred, gt, last).data)
    full_p = np.concatenate([last[..., None], pred], axis=-1)[None]
    full_g = np.concatenate([last[..., None], gt], axis=-1)[None]
    assert abs(with_last - oracles.loop_velocity_loss(full_p, full_g)) < 1e-12


def test_loss_errors():
    with pytest.raises(ShapeError):
        motion_loss(np.zeros((3, 2, 4)), np.zeros((3, 2, 5)))
    with pytest.raises(ShapeError):
        velocity_loss(np.zeros((3, 2, 1)), np.zeros((3, 2, 1)))
    with pytest.raises(ShapeError):
        velocity_loss(np.zeros((3, 2, 4)), np.zeros((3, 2, 4)), np.zeros((3, 3)))


def test_total_loss_gradient():
    r = np.random.default_rng(3)
    pred = Tensor(r.normal(size=(3, 4, 5)), requires_grad=True)
    gt = r.normal(size=(3, 4, 5))
    errs = check_gradients(lambda: total_loss(pred, gt), {"pred": pred})
    assert errs[0].rel < 1e-5


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_losses_nonnegative(seed):
    r = np.random.default_rng(seed)
    pred, gt = r.normal(size=(3, 3, 4)), r.normal(size=(3, 3, 4))
    assert float(motion_loss(pred, gt).data) > 0
    assert float(velocity_loss(pred, gt).data) >= 0


def test_adam_first_step_closed_form():
    w = Tensor(np.array([2.0]), requires_grad=True)
    w.grad = np.array([1.0])
    state = AdamState()
    adam_step({"w": w}, state, lr=0.01)
    # m_hat = 1, v_hat = 1, so the step is lr / (1 + eps)
    assert abs(w.data[0] - (2.0 - 0.01 / (1 + 1e-8))) < 1e-15
    assert state.step == 1
    np.testing.assert_allclose(state.m["w"], [0.1])
    np.testing.assert_allclose(state.v["w"], [0.001])


def test_adam_zero_gradient_and_zero_lr():
    w = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    state = AdamState()
    w.grad = np.array([0.5, 0.5])
    adam_step({"w": w}, state, 0.01)
    before, m_before = w.data.copy(), state.m["w"].copy()
    w.grad = np.zeros(2)
    adam_step({"w": w}, state, 0.0)
    np.testing.assert_array_equal(w.data, before)
    np.testing.assert_allclose(state.m["w"], 0.9 * m_before)
    w.grad = None  # a missing gradient counts as zero
    adam_step({"w": w}, state, 0.0)
    np.testing.assert_array_equal(w.data, before)


def test_adam_nan_names_parameter():
    w = Tensor(np.ones(2), requires_grad=True)
    w.grad = np.array([1.0, np.nan])
    with pytest.raises(NonFiniteError, match="fuse_stack.0.w"):
        adam_step({"fuse_stack.0.w": w}, AdamState(), 0.01)


def test_adam_quadratic_bowl_decreases():
    w = Tensor(np.array([0.8, -0.5, 0.3]), requires_grad=True)
    state = AdamState()
    losses = []
    for _ in range(100):
        w.grad = None
        with Tape() as tape:
            loss = ad.total(ad.mul(w, w))
        tape.backward(loss)
        losses.append(float(loss.data))
        adam_step({"w": w}, state, 0.01)
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_lr_schedule_and_config_checks():
    cfg = TrainConfig()
    for e in range(80):
        assert abs(cfg.lr_at(e) - 0.01 * 0.95**e) < 1e-12
    for bad in (dict(lr0=0), dict(lr_decay_per_epoch=1.5), dict(batch_size=0)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"learning_rate": 1})


@pytest.fixture(scope="module")
def reach_windows():
    return windows_from_sequences(generate_corpus(6, seed=3, scenario="reach"), stride=4)


def test_single_sample_single_short_batch(reach_windows):
    one = reach_windows.take([0])
    params, hist = train(one, TrainConfig(epochs=1, batch_size=32), SMALL)
    assert len(hist) == 1 and math.isfinite(hist[0].loss)
    assert all(np.isfinite(p.data).all() for _, p in params.named_parameters())


def test_training_is_deterministic(reach_windows):
    data = reach_windows.take(np.arange(12))
    cfg = TrainConfig(epochs=2, batch_size=5, seed=11)
    p1, h1 = train(data, cfg, SMALL)
    p2, h2 = train(data, cfg, SMALL)
    assert [r.loss for r in h1] == [r.loss for r in h2]
    for (_, a), (_, b) in zip(p1.named_parameters(), p2.named_parameters()):
        np.testing.assert_array_equal(a.data, b.data)
    text = format_loss_curve(h1)
    assert text.splitlines()[0] == "epoch\tlr\ttrain_loss" and len(text.splitlines()) == 3


def test_training_reduces_loss(reach_windows):
    cfg = dataclasses.replace(SMALL, dtype="float32")
    _, hist = train(reach_windows, TrainConfig(epochs=20, batch_size=16, seed=0), cfg)
    assert hist[-1].loss < 0.5 * hist[0].loss


def test_train_input_checks(reach_windows):
    with pytest.raises(ValueError):
        train(reach_windows.take(np.arange(0)), TrainConfig(epochs=1), SMALL)
    with pytest.raises(ShapeError):
        train(reach_windows, TrainConfig(epochs=1), dataclasses.replace(SMALL, t_in=5, t_total=35))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_aborts(reach_windows):
    bad = reach_windows.take(np.arange(3))
    bad.target[1, 0, 0, 0] = np.inf
    with pytest.raises(NonFiniteError, match="epoch 0, batch 0"):
        train(bad, TrainConfig(epochs=1), SMALL)

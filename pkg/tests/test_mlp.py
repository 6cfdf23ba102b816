import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from hoimotion import autodiff as ad
from hoimotion.autodiff import ShapeError, Tensor
from hoimotion.dct import make_dct_pair
from hoimotion.gradcheck import check_gradients
from hoimotion.mlp import (
    Mlp3, extract_head_features, extract_object_features, flatten_objects, mlp_forward,
    pad_repeat_last, unflatten_objects,
)


def test_pad_repeat_last_examples():
    np.testing.assert_array_equal(pad_repeat_last(np.array([1.0, 2, 3]), 5).data, [1, 2, 3, 3, 3])
    x = Tensor(np.random.default_rng(0).normal(size=(3, 21, 10)))
    y = pad_repeat_last(x, 40).data
    assert y.shape == (3, 21, 40)
    np.testing.assert_array_equal(y[..., :10], x.data)
    np.testing.assert_array_equal(y[..., 10:], np.repeat(x.data[..., 9:10], 30, axis=-1))
    assert pad_repeat_last(x, 10) is x
    with pytest.raises(ShapeError):
        pad_repeat_last(x, 9)
    with pytest.raises(ShapeError):
        pad_repeat_last(np.zeros((3, 0)), 4)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 8), st.integers(0, 2**31 - 1))
def test_pad_is_idempotent(t, extra, seed):
    x = np.random.default_rng(seed).normal(size=(2, t))
    once = pad_repeat_last(x, t + extra).data
    np.testing.assert_array_equal(pad_repeat_last(once, t + extra).data, once)


def test_tiny_mlp_by_hand():
    r = np.random.default_rng(1)
    m = Mlp3.init(r, 2, widths=(2, 2, 2))
    for _, p in m.named_parameters():
        p.data[:] = r.normal(size=p.shape)
    x = r.normal(size=(3, 2))

    def ln2(v, s, b):
        # two channels: normalized values are +-a/sqrt(a^2 + eps) with a = half the gap
        half = (v[0] - v[1]) / 2
        z = half / math.sqrt(half * half + 1e-6)
        return np.array([z, -z]) * s + b

    for i, row in enumerate(x):
        h = row
        for k in (1, 2, 3):
            h = h @ getattr(m, f"w{k}").data + getattr(m, f"b{k}").data
            h = np.tanh(ln2(h, getattr(m, f"ln{k}_scale").data, getattr(m, f"ln{k}_shift").data))
        assert np.abs(mlp_forward(x, m).data[i] - h).max() < 1e-12


def test_mlp_bounded_and_eval_deterministic():
    r = np.random.default_rng(2)
    m = Mlp3.init(r, 3)
    x = r.normal(size=(40, 3)) * 10
    a, b = mlp_forward(x, m).data, mlp_forward(x, m).data
    assert a.shape == (40, 16) and np.abs(a).max() < 1
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ShapeError):
        mlp_forward(r.normal(size=(4, 5)), m)


def test_head_features_match_mlp_on_dct_rows():
    r = np.random.default_rng(3)
    pair = make_dct_pair(40)
    m = Mlp3.init(r, 3)
    d = r.normal(size=3)
    H = np.repeat((d / np.linalg.norm(d))[:, None], 10, axis=1)
    out = extract_head_features(H, pair, m).data
    assert out.shape == (16, 40)
    coef = oracles.along_time(oracles.pad_last(H, 40), oracles.dct_matrix(40))
    # a constant direction has only a DC coefficient
    assert np.abs(coef[:, 1:]).max() < 1e-12
    ref = oracles.mlp_rows([coef[:, i] for i in range(40)], m).T
    assert np.abs(out - ref).max() < 1e-12
    np.testing.assert_array_equal(out, extract_head_features(H, pair, m).data)


def test_object_features_shape_and_bounds():
    r = np.random.default_rng(4)
    pair = make_dct_pair(40)
    m = Mlp3.init(r, 48)
    out = extract_object_features(r.normal(size=(3, 8, 2, 10)), pair, m).data
    assert out.shape == (16, 40) and np.abs(out).max() < 1
    with pytest.raises(ShapeError):
        extract_object_features(r.normal(size=(3, 8, 3, 10)), pair, m)


def test_flatten_order():
    x = np.zeros((3, 8, 2, 1))
    for c in range(3):
        for v in range(8):
            for o in range(2):
                x[c, v, o, 0] = o * 24 + v * 3 + c
    np.testing.assert_array_equal(flatten_objects(Tensor(x)).data[0], np.arange(48))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 5), st.integers(0, 2), st.integers(0, 2**31 - 1))
def test_flatten_roundtrip(k, T, lead, seed):
    shape = (2,) * lead + (3, 8, k, T)
    B = np.random.default_rng(seed).normal(size=shape)
    np.testing.assert_array_equal(unflatten_objects(flatten_objects(Tensor(B)).data), B)


def test_mlp_paths_gradcheck():
    r = np.random.default_rng(5)
    pair = make_dct_pair(5)
    head_mlp, obj_mlp = Mlp3.init(r, 3, (6, 6, 4)), Mlp3.init(r, 48, (6, 6, 4))
    H, B = r.normal(size=(3, 3)), r.normal(size=(3, 8, 2, 3))
    R = Tensor(r.normal(size=(4, 5)))
    for mlp, fn, x in ((head_mlp, extract_head_features, H), (obj_mlp, extract_object_features, B)):
        params = dict(mlp.named_parameters())
        loss = lambda: ad.total(ad.mul(fn(x, pair, mlp, "train", np.random.default_rng(0)), R))
        assert max(e.rel for e in check_gradients(loss, params)) < 1e-5


def test_static_and_dynamic_mlps_do_not_share():
    from hoimotion.model import ModelConfig, ModelParams

    p = ModelParams.init(ModelConfig(n_joints=4, t_in=3, t_total=6, n_pose_residual=0, n_fuse_residual=0), 0)
    for (_, a), (_, b) in zip(p.dynamic_mlp.named_parameters(), p.static_mlp.named_parameters()):
        assert a is not b and a.data is not b.data

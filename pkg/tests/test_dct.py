import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hoimotion.autodiff import ShapeError, Tape, Tensor, total, mul
from hoimotion.dct import dct_time, idct_time, make_dct_pair


def test_small_matrices():
    np.testing.assert_allclose(make_dct_pair(1).m_dct, [[1.0]])
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(make_dct_pair(2).m_dct, [[s, s], [s, -s]], atol=1e-15)


def test_orthogonal_40():
    pair = make_dct_pair(40)
    assert np.abs(pair.m_dct @ pair.m_dct.T - np.eye(40)).max() < 1e-12
    assert np.abs(pair.m_dct @ pair.m_idct - np.eye(40)).max() < 1e-10
    np.testing.assert_array_equal(pair.m_idct, pair.m_dct.T)


def test_constant_goes_to_dc():
    pair = make_dct_pair(4)
    c = 1.7
    coef = dct_time(np.full(4, c), pair).data
    np.testing.assert_allclose(coef, [2 * c, 0, 0, 0], atol=1e-14)
    np.testing.assert_allclose(idct_time(coef, pair).data, np.full(4, c), atol=1e-14)
    np.testing.assert_array_equal(dct_time(np.zeros(4), pair).data, 0)


def test_matches_scipy_dct():
    fft = pytest.importorskip("scipy.fft")
    x = np.random.default_rng(0).normal(size=(3, 21, 40))
    np.testing.assert_allclose(dct_time(x, make_dct_pair(40)).data, fft.dct(x, norm="ortho", axis=-1),
                               atol=1e-12)


def test_roundtrip_model_shapes():
    pair = make_dct_pair(40)
    r = np.random.default_rng(1)
    for shape in [(3, 21, 40), (3, 40), (48, 40)]:
        x = r.normal(size=shape)
        assert np.abs(idct_time(dct_time(x, pair), pair).data - x).max() < 1e-10


def test_gradient_is_transpose():
    pair = make_dct_pair(6)
    x = Tensor(np.random.default_rng(2).normal(size=(2, 6)), requires_grad=True)
    R = np.random.default_rng(3).normal(size=(2, 6))
    with Tape() as tape:
        loss = total(mul(dct_time(x, pair), Tensor(R)))
    tape.backward(loss)
    np.testing.assert_allclose(x.grad, R @ pair.m_dct.T, atol=1e-14)


def test_errors_and_immutability():
    with pytest.raises(ValueError):
        make_dct_pair(0)
    pair = make_dct_pair(5)
    with pytest.raises(ShapeError):
        dct_time(np.zeros((3, 4)), pair)
    with pytest.raises(ValueError):
        pair.m_dct[0, 0] = 2.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 80), st.integers(0, 2**31 - 1))
def test_parseval_and_roundtrip(T, seed):
    pair = make_dct_pair(T)
    x = np.random.default_rng(seed).normal(size=(3, T))
    y = dct_time(x, pair).data
    assert abs((y**2).sum() - (x**2).sum()) <= 1e-9 * (x**2).sum()
    assert np.abs(idct_time(y, pair).data - x).max() < 1e-10

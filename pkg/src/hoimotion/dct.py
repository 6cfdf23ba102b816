"""Orthonormal DCT-II matrices applied along the trailing (time) axis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ShapeError, Tensor, matmul, reshape


@dataclass(frozen=True)
class DctPair:
    m_dct: np.ndarray
    m_idct: np.ndarray

    @property
    def size(self) -> int:
        return self.m_dct.shape[0]

    def astype(self, dtype) -> "DctPair":
        return DctPair(self.m_dct.astype(dtype), self.m_idct.astype(dtype))


def make_dct_pair(T: int) -> DctPair:
    """Build the T x T DCT matrix for right-multiplication, and its inverse.

    Column ``k`` of ``m_dct`` holds basis function ``k`` sampled at the T time
    steps, so ``x @ m_dct`` turns a time series into coefficients. The matrix
    is orthogonal and the inverse is its transpose.
    """
    if int(T) != T or T < 1:
        raise ValueError(f"DCT size must be a positive integer, got {T}")
    T = int(T)
    k = np.arange(T)[:, None]
    j = np.arange(T)[None, :]
    basis = np.cos(np.pi * (2 * j + 1) * k / (2 * T))
    basis *= np.where(k == 0, np.sqrt(1.0 / T), np.sqrt(2.0 / T))
    # basis[k, j]: coefficient k from sample j; coefficients = x @ basis.T
    m_dct = np.ascontiguousarray(basis.T)
    m_idct = np.ascontiguousarray(basis)
    m_dct.setflags(write=False)
    m_idct.setflags(write=False)
    return DctPair(m_dct, m_idct)


def _apply(x, m: np.ndarray, what: str) -> Tensor:
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.shape[-1] != m.shape[0]:
        raise ShapeError(f"{what}: trailing axis {x.shape[-1]} != transform size {m.shape[0]}")
    m = Tensor(m.astype(x.dtype, copy=False))
    if x.ndim == 1:
        return reshape(matmul(reshape(x, (1, x.shape[0])), m), x.shape)
    return matmul(x, m)


def dct_time(x, pair: DctPair) -> Tensor:
    return _apply(x, pair.m_dct, "dct_time")


def idct_time(y, pair: DctPair) -> Tensor:
    return _apply(y, pair.m_idct, "idct_time")

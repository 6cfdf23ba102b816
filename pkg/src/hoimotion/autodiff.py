"""Dense numpy-backed tensors with tape-based reverse-mode differentiation.

Only the handful of operations the forecaster needs are provided. Every op
checks shapes explicitly; nothing broadcasts unless the op says so.

Usage::

    with Tape() as tape:
        loss = total(tanh(matmul(x, w)))
    tape.backward(loss)
    w.grad
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class TapeError(RuntimeError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_tape")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        # set for op outputs recorded on a tape; None for leaves and constants
        self._tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._tape is None

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag}, requires_grad={self.requires_grad})"


class _Node:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out: Tensor, inputs: tuple[Tensor, ...], backward: Callable):
        self.out = out
        self.inputs = inputs
        self.backward = backward


_local = threading.local()


def _active_tape() -> "Tape | None":
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


class Tape:
    """Ordered record of differentiable operations.

    A tape belongs to the thread that opened it. ``backward`` may be called
    once; build a fresh tape for the next step.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self.consumed = False

    def __enter__(self) -> "Tape":
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _local.stack.pop()

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward: Callable) -> None:
        out._tape = self
        self.nodes.append(_Node(out, inputs, backward))

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss._tape is not self:
            raise TapeError("loss was not produced on this tape (detached graph)")
        if self.consumed:
            raise TapeError("backward already ran on this tape; record a new one")
        self.consumed = True

        pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = pending.pop(id(node.out), None)
            if g is None:
                continue
            for inp, gi in zip(node.inputs, node.backward(g)):
                if gi is None or not inp.requires_grad:
                    continue
                if inp._tape is None:
                    inp.grad = gi.copy() if inp.grad is None else inp.grad + gi
                else:
                    key = id(inp)
                    prev = pending.get(key)
                    pending[key] = gi if prev is None else prev + gi
        # saved activations are no longer needed
        self.nodes = []


def backward(loss: Tensor) -> None:
    """Run reverse accumulation on the tape that produced ``loss``."""
    if loss._tape is None:
        raise TapeError("loss is not attached to any tape (detached graph)")
    loss._tape.backward(loss)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(data: np.ndarray, inputs: Sequence[Tensor], backward: Callable) -> Tensor:
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs, dtype=data.dtype)
    tape = _active_tape()
    if needs and tape is not None:
        tape.record(out, tuple(inputs), backward)
    return out


# --------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Tensor:
    """Matrix product over the trailing two axes.

    Exactly one operand may carry leading batch axes: ``a[..., p, q] @ b[q, r]``
    or ``a[p, q] @ b[..., q, r]``. The gradient of the unbatched operand is
    accumulated over the batch.
    """
    a, b = _wrap(a), _wrap(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs matrices, got {a.shape} and {b.shape}")
    if a.ndim > 2 and b.ndim > 2:
        raise ShapeError(f"matmul: only one operand may be batched, got {a.shape} and {b.shape}")
    p, q = a.shape[-2:]
    q2, r = b.shape[-2:]
    if q != q2:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} and {b.shape}")

    A, B = a.data, b.data
    if b.ndim == 2:
        lead = A.shape[:-2]
        out = (A.reshape(-1, q) @ B).reshape(*lead, p, r)

        def back(g):
            g2 = g.reshape(-1, r)
            da = (g2 @ B.T).reshape(A.shape) if a.requires_grad else None
            db = A.reshape(-1, q).T @ g2 if b.requires_grad else None
            return da, db
    else:
        # broadcast matmul runs one small GEMM per batch entry, which beats
        # transposing the batch into a single wide product
        out = np.matmul(A, B)

        def back(g):
            da = db = None
            if a.requires_grad:
                da = np.matmul(g.reshape(-1, p, r), B.reshape(-1, q, r).transpose(0, 2, 1)).sum(axis=0)
            if b.requires_grad:
                db = np.matmul(A.T, g)
            return da, db

    return _emit(np.ascontiguousarray(out), (a, b), back)


def permute(x, order: Sequence[int]) -> Tensor:
    x = _wrap(x)
    order = tuple(int(i) for i in order)
    if sorted(order) != list(range(x.ndim)):
        raise ShapeError(f"{order} is not a permutation of the axes of a {x.ndim}-d tensor")
    inverse = tuple(np.argsort(order))
    out = np.ascontiguousarray(np.transpose(x.data, order))
    return _emit(out, (x,), lambda g: (np.transpose(g, inverse),))


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = _wrap(x)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != x.data.size or any(s <= 0 for s in shape):
        raise ShapeError(f"cannot reshape {x.shape} to {shape}")
    src = x.shape
    return _emit(x.data.reshape(shape), (x,), lambda g: (g.reshape(src),))


def concat(xs: Sequence, axis: int) -> Tensor:
    xs = [_wrap(x) for x in xs]
    if not xs:
        raise ShapeError("concat needs at least one tensor")
    ndim = xs[0].ndim
    ax = axis % ndim if ndim else 0
    for x in xs[1:]:
        if x.ndim != ndim or any(
            s != t for i, (s, t) in enumerate(zip(x.shape, xs[0].shape)) if i != ax
        ):
            raise ShapeError(
                f"concat along axis {axis}: incompatible shapes {[x.shape for x in xs]}"
            )
    out = np.concatenate([x.data for x in xs], axis=ax)
    bounds = np.cumsum([0] + [x.shape[ax] for x in xs])

    def back(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax) for i in range(len(xs))
        )

    return _emit(out, xs, back)


def slice_axis(x, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice ``[start, stop)`` along one axis."""
    x = _wrap(x)
    ax = axis % x.ndim
    n = x.shape[ax]
    if not 0 <= start < stop <= n:
        raise ShapeError(f"slice [{start}, {stop}) out of range for axis of extent {n}")
    index = [slice(None)] * x.ndim
    index[ax] = slice(start, stop)
    index = tuple(index)
    src_shape, dtype = x.shape, x.dtype

    def back(g):
        full = np.zeros(src_shape, dtype=dtype)
        full[index] = g
        return (full,)

    return _emit(np.ascontiguousarray(x.data[index]), (x,), back)


# --------------------------------------------------------------------------
# elementwise


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes differ, {a.shape} vs {b.shape}")


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _same_shape("add", a, b)
    return _emit(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _same_shape("sub", a, b)
    return _emit(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _same_shape("mul", a, b)
    A, B = a.data, b.data
    return _emit(A * B, (a, b), lambda g: (g * B, g * A))


def scale_by(x, c: float) -> Tensor:
    x = _wrap(x)
    c = float(c)
    return _emit(x.data * c, (x,), lambda g: (g * c,))


def add_bias(x, bias) -> Tensor:
    """Add a vector along the trailing axis (the one documented broadcast)."""
    x, bias = _wrap(x), _wrap(bias)
    if bias.ndim != 1 or x.shape[-1] != bias.shape[0]:
        raise ShapeError(f"add_bias: bias {bias.shape} does not match trailing axis of {x.shape}")
    c = bias.shape[0]
    return _emit(x.data + bias.data, (x, bias), lambda g: (g, g.reshape(-1, c).sum(axis=0)))


def tanh(x) -> Tensor:
    x = _wrap(x)
    y = np.tanh(x.data)
    return _emit(y, (x,), lambda g: (g * (1.0 - y * y),))


def dropout(x, rate: float, mode: str, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors are scaled by ``1 / (1 - rate)`` in train mode."""
    x = _wrap(x)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if mode == "eval" or rate == 0.0:
        if mode not in ("train", "eval"):
            raise ValueError(f"unknown mode {mode!r}")
        return x
    if mode != "train":
        raise ValueError(f"unknown mode {mode!r}")
    if rng is None:
        raise ValueError("train-mode dropout needs a random generator")
    # 16-bit uniform draws are much cheaper than float draws; the effective rate
    # is rounded to a multiple of 2**-16 and the survivor scale matches it.
    cut = int(round(rate * 65536))
    bits = np.frombuffer(rng.bytes(2 * x.data.size), dtype="<u2").reshape(x.shape)
    mask = (bits >= cut).astype(x.dtype)
    mask *= x.dtype.type(65536.0 / (65536 - cut))
    return _emit(x.data * mask, (x,), lambda g: (g * mask,))


def layer_norm(x, scale, shift, eps: float = 1e-6) -> Tensor:
    """Normalize over the trailing (channel) axis, then apply a per-channel affine map."""
    x, scale, shift = _wrap(x), _wrap(scale), _wrap(shift)
    c = x.shape[-1]
    if c < 2:
        raise ShapeError(f"layer_norm needs at least 2 channels, got {c}")
    if scale.shape != (c,) or shift.shape != (c,):
        raise ShapeError(f"layer_norm: scale {scale.shape} / shift {shift.shape} must be ({c},)")
    # channel means as a matrix-vector product over a 2-D view; numpy's
    # reductions along a short trailing axis are several times slower
    avg = np.full((c, 1), 1.0 / c, dtype=x.dtype)
    X = x.data.reshape(-1, c)
    xhat = X - X @ avg
    rstd = (xhat * xhat) @ avg
    rstd += eps
    np.sqrt(rstd, out=rstd)
    np.reciprocal(rstd, out=rstd)
    xhat *= rstd
    out = xhat * scale.data
    out += shift.data
    out = out.reshape(x.shape)
    shape = x.shape

    def back(g):
        g = g.reshape(-1, c)
        gx = g * xhat
        dscale = gx.sum(axis=0)
        dshift = g.sum(axis=0)
        dxhat = g * scale.data
        gx = dxhat * xhat
        dx = dxhat - dxhat @ avg
        dx -= xhat * (gx @ avg)
        dx *= rstd
        return dx.reshape(shape), dscale, dshift

    return _emit(out, (x, scale, shift), back)


# --------------------------------------------------------------------------
# reductions


def total(x) -> Tensor:
    """Sum of all entries as a 0-d tensor."""
    x = _wrap(x)
    shape = x.shape
    return _emit(np.asarray(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(x) -> Tensor:
    x = _wrap(x)
    n = x.data.size
    shape = x.shape
    return _emit(
        np.asarray(x.data.mean()), (x,), lambda g: (np.full(shape, g / n, dtype=x.dtype),)
    )


def sum_squares(x, axis: int) -> Tensor:
    x = _wrap(x)
    X = x.data
    return _emit((X * X).sum(axis=axis), (x,), lambda g: (2.0 * np.expand_dims(g, axis) * X,))


def norm(x, axis: int, eps: float = 1e-12) -> Tensor:
    """Smoothed Euclidean norm ``s / sqrt(s + eps)`` with ``s = sum(x**2)`` along ``axis``.

    Exactly zero, with zero gradient, at the origin; elsewhere it sits below
    the true norm by at most ``eps / (2 |x|)``.
    """
    x = _wrap(x)
    X = x.data
    s = (X * X).sum(axis=axis)
    r = np.sqrt(s + eps)
    return _emit(s / r, (x,), lambda g: (np.expand_dims(g * (s + 2 * eps) / r**3, axis) * X,))

"""Differentiable operations on :class:`Tensor`.

Each function computes its forward value with numpy and attaches a closure
returning one gradient per parent (``None`` where no gradient flows).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import ContractError, ShapeError, Tensor, as_tensor


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# --- elementwise -----------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return Tensor._from_op(
        a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return Tensor._from_op(
        a.data - b.data, (a, b),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return Tensor._from_op(
        ad * bd, (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)), "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    out = ad / bd
    return Tensor._from_op(
        out, (a, b),
        lambda g: (_unbroadcast(g / bd, ad.shape), _unbroadcast(-g * out / bd, bd.shape)), "div")


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * out,), "exp")


def log(x: Tensor) -> Tensor:
    xd = x.data
    return Tensor._from_op(np.log(xd), (x,), lambda g: (g / xd,), "log")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def relu(x: Tensor) -> Tensor:
    keep = x.data > 0
    return Tensor._from_op(np.where(keep, x.data, 0.0), (x,), lambda g: (g * keep,), "relu")


# --- linear algebra and shape ----------------------------------------------

def matmul(a, b) -> Tensor:
    """Matrix product with numpy broadcasting over a leading batch axis.

    Accepts ``[m,k]@[k,n]``, ``[k]@[k,n]``, ``[B,m,k]@[k,n]`` and
    ``[B,m,k]@[B,k,n]``.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    if a.ndim == 3 and b.ndim == 3 and a.shape[0] != b.shape[0]:
        raise ShapeError(f"matmul: batch sizes differ, {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        if ad.ndim == 1:
            return g @ np.swapaxes(bd, -1, -2), np.outer(ad, g)
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return Tensor._from_op(ad @ bd, (a, b), backward, "matmul")


def transpose(x: Tensor) -> Tensor:
    """Swap the last two axes."""
    return Tensor._from_op(np.swapaxes(x.data, -1, -2), (x,),
                           lambda g: (np.swapaxes(g, -1, -2),), "transpose")


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    old = x.shape
    return Tensor._from_op(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def getitem(x: Tensor, index) -> Tensor:
    shape = x.shape

    idx = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(i, (slice, int)) or i is Ellipsis for i in idx)

    def backward(g):
        full = np.zeros(shape)
        if basic:
            full[index] += g
        else:
            np.add.at(full, index, g)
        return (full,)

    return Tensor._from_op(np.array(x.data[index]), (x,), backward, "getitem")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(
                s != r for i, (s, r) in enumerate(zip(t.shape, ref)) if i != ax):
            raise ShapeError(f"concat: shapes {ref} and {t.shape} differ off axis {axis}")
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=ax))

    return Tensor._from_op(np.concatenate([t.data for t in tensors], axis=ax),
                           tuple(tensors), backward, "concat")


def stack_time(steps: Sequence[Tensor]) -> Tensor:
    """Stack ``[..., d]`` step outputs into ``[..., T, d]`` along axis -2."""
    ax = steps[0].ndim - 1

    def backward(g):
        return tuple(np.take(g, i, axis=ax) for i in range(len(steps)))

    return Tensor._from_op(np.stack([s.data for s in steps], axis=ax),
                           tuple(steps), backward, "stack_time")


# --- reductions ------------------------------------------------------------

def sum(x: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001
    shape = x.shape

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return Tensor._from_op(np.asarray(x.data.sum(axis=axis)), (x,), backward, "sum")


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    n = x.data.size if axis is None else x.shape[axis]
    return mul(sum(x, axis), 1.0 / n)


def masked_max(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Max over the time axis (-2) of ``[..., T, d]``, ignoring rows where mask is false.

    Ties route the gradient to the earliest maximal step.
    """
    xd = x.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any(axis=-1).all():
            raise ContractError("masked_max: a sequence has no unmasked steps")
        xd = np.where(mask[..., None], xd, -np.inf)
    idx = np.argmax(xd, axis=-2)
    out = np.take_along_axis(xd, np.expand_dims(idx, -2), axis=-2).squeeze(-2)
    shape = x.shape

    def backward(g):
        full = np.zeros(shape)
        np.put_along_axis(full, np.expand_dims(idx, -2), np.expand_dims(g, -2), axis=-2)
        return (full,)

    return Tensor._from_op(out, (x,), backward, "masked_max")


# --- normalisation ---------------------------------------------------------

def softmax(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over the last axis; masked-out entries come out exactly zero."""
    xd = x.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), xd.shape)
        if not mask.any(axis=-1).all():
            raise ContractError("softmax: a row is fully masked")
        xd = np.where(mask, xd, -np.inf)
    z = xd - xd.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return Tensor._from_op(out, (x,), backward, "softmax")


def log_softmax(x: Tensor) -> Tensor:
    xd = x.data
    z = xd - xd.max(axis=-1, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    p = np.exp(out)

    def backward(g):
        return (g - p * g.sum(axis=-1, keepdims=True),)

    return Tensor._from_op(out, (x,), backward, "log_softmax")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, epsilon: float = 1e-5) -> Tensor:
    """Normalise over the feature axis with population variance, then scale and shift."""
    if epsilon <= 0:
        raise ContractError("layer_norm: epsilon must be positive")
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: gain {gain.shape} / bias {bias.shape} do not match d={d}")
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + epsilon)
    xhat = xc * inv
    gd = gain.data

    def backward(g):
        gx = g * gd
        dx = inv * (gx - gx.mean(axis=-1, keepdims=True)
                    - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
        ggain = (g * xhat).reshape(-1, d).sum(axis=0)
        gbias = g.reshape(-1, d).sum(axis=0)
        return dx, ggain, gbias

    return Tensor._from_op(xhat * gd + bias.data, (x, gain, bias), backward, "layer_norm")


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator | int | None = None) -> Tensor:
    """Inverted dropout. Identity outside training or at rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout: rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return Tensor._from_op(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


def nll(logprobs: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean negative log-likelihood of integer targets under ``[B, C]`` log-probabilities."""
    targets = np.asarray(targets, dtype=np.int64)
    b = logprobs.shape[0]
    rows = np.arange(b)

    def backward(g):
        full = np.zeros(logprobs.shape)
        full[rows, targets] = -g / b
        return (full,)

    return Tensor._from_op(np.asarray(-logprobs.data[rows, targets].mean()),
                           (logprobs,), backward, "nll")


def reverse_padded(x: Tensor, lengths: Sequence[int]) -> Tensor:
    """Reverse each ``[B, T, d]`` sequence within its own length; padding stays put."""
    b, t = x.shape[0], x.shape[1]
    idx = np.tile(np.arange(t), (b, 1))
    for i, n in enumerate(lengths):
        idx[i, :n] = np.arange(n)[::-1]
    gather = idx[..., None]

    def backward(g):
        # the permutation is an involution
        return (np.take_along_axis(g, gather, axis=1),)

    return Tensor._from_op(np.take_along_axis(x.data, gather, axis=1), (x,), backward, "reverse_padded")

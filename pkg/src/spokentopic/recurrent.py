"""LSTM cells and stacked bidirectional LSTM layers.

Gate order inside every 4h-wide weight block is input, forget, cell
candidate, output. Sequences are batched as ``[B, T, d]`` with per-row
lengths; the right-to-left direction reverses each row within its own
length, so padded steps never influence real ones.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .numerics import ops
from .numerics.module import Module, uniform_init
from .numerics.ops import _sigmoid
from .numerics.tensor import ContractError, ShapeError, Tensor


class LstmLayer(Module):
    """One direction of an LSTM: input weights, recurrent weights, bias."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.w_ih = uniform_init(rng, (input_dim, 4 * hidden_dim), input_dim)
        self.w_hh = uniform_init(rng, (hidden_dim, 4 * hidden_dim), hidden_dim)
        bias = np.zeros(4 * hidden_dim)
        bias[hidden_dim:2 * hidden_dim] = 1.0
        self.bias = Tensor(bias, requires_grad=True)


def lstm_cell_step(x_t: Tensor, h_prev: Tensor, c_prev: Tensor, layer: LstmLayer) -> tuple[Tensor, Tensor]:
    """One LSTM step built from elementary tape operations."""
    h = layer.hidden_dim
    if x_t.shape[-1] != layer.input_dim or h_prev.shape[-1] != h or c_prev.shape[-1] != h:
        raise ShapeError(
            f"lstm_cell_step: got x {x_t.shape}, h {h_prev.shape}, c {c_prev.shape} "
            f"for input_dim={layer.input_dim}, hidden_dim={h}")
    z = ops.matmul(x_t, layer.w_ih) + ops.matmul(h_prev, layer.w_hh) + layer.bias
    i = ops.sigmoid(z[..., 0:h])
    f = ops.sigmoid(z[..., h:2 * h])
    g = ops.tanh(z[..., 2 * h:3 * h])
    o = ops.sigmoid(z[..., 3 * h:4 * h])
    c_t = f * c_prev + i * g
    h_t = o * ops.tanh(c_t)
    return h_t, c_t


def lstm_scan(xproj: Tensor, w_hh: Tensor) -> Tensor:
    """Run the recurrence over ``[B, T, 4h]`` pre-projected inputs from zero state.

    A single tape node whose backward pass is hand-written BPTT; the
    composite :func:`lstm_cell_step` serves as its independent reference.
    """
    xp = xproj.data
    whh = w_hh.data
    b, t_len, four_h = xp.shape
    h = four_h // 4
    hs = np.zeros((b, t_len + 1, h))
    cs = np.zeros((b, t_len + 1, h))
    gates = np.empty((b, t_len, four_h))
    for t in range(t_len):
        z = xp[:, t] + hs[:, t] @ whh
        a = gates[:, t]
        a[:, :2 * h] = _sigmoid(z[:, :2 * h])
        a[:, 2 * h:3 * h] = np.tanh(z[:, 2 * h:3 * h])
        a[:, 3 * h:] = _sigmoid(z[:, 3 * h:])
        cs[:, t + 1] = a[:, h:2 * h] * cs[:, t] + a[:, :h] * a[:, 2 * h:3 * h]
        hs[:, t + 1] = a[:, 3 * h:] * np.tanh(cs[:, t + 1])

    def backward(dH):
        dxp = np.empty_like(xp)
        dwhh = np.zeros_like(whh)
        dh_next = np.zeros((b, h))
        dc_next = np.zeros((b, h))
        for t in range(t_len - 1, -1, -1):
            a = gates[:, t]
            i, f, g, o = a[:, :h], a[:, h:2 * h], a[:, 2 * h:3 * h], a[:, 3 * h:]
            tc = np.tanh(cs[:, t + 1])
            dh = dH[:, t] + dh_next
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dz = dxp[:, t]
            dz[:, :h] = dc * g * i * (1.0 - i)
            dz[:, h:2 * h] = dc * cs[:, t] * f * (1.0 - f)
            dz[:, 2 * h:3 * h] = dc * i * (1.0 - g * g)
            dz[:, 3 * h:] = dh * tc * o * (1.0 - o)
            dwhh += hs[:, t].T @ dz
            dh_next = dz @ whh.T
            dc_next = dc * f
        return dxp, dwhh

    return Tensor._from_op(hs[:, 1:].copy(), (xproj, w_hh), backward, "lstm_scan")


def lstm_direction(x: Tensor, layer: LstmLayer, lengths: Sequence[int], reverse: bool) -> Tensor:
    xproj = ops.matmul(x, layer.w_ih) + layer.bias
    if not reverse:
        return lstm_scan(xproj, layer.w_hh)
    out = lstm_scan(ops.reverse_padded(xproj, lengths), layer.w_hh)
    return ops.reverse_padded(out, lengths)


class BiLstmLayer(Module):
    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.fwd = LstmLayer(input_dim, hidden_dim, rng)
        self.bwd = LstmLayer(input_dim, hidden_dim, rng)

    @property
    def output_dim(self) -> int:
        return 2 * self.fwd.hidden_dim


class BiLstm(Module):
    """A stack of bidirectional layers with dropout on each layer's input."""

    def __init__(self, input_dim: int, hidden_dim: int, num_layers: int, rng: np.random.Generator):
        dims = [input_dim] + [2 * hidden_dim] * (num_layers - 1)
        self.layers = [BiLstmLayer(d, hidden_dim, rng) for d in dims]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].output_dim

    def __call__(self, x: Tensor, lengths: Sequence[int] | None = None, dropout_rate: float = 0.0,
                 training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        return bilstm_forward(x, self.layers, dropout_rate, training, rng, lengths)


def bilstm_forward(x: Tensor, layers: Sequence[BiLstmLayer], dropout_rate: float = 0.0,
                   training: bool = False, rng: np.random.Generator | None = None,
                   lengths: Sequence[int] | None = None) -> Tensor:
    """Bidirectional stack over ``[T, d]`` or a padded ``[B, T, d]`` batch.

    Returns ``[..., T, 2h]`` with left-to-right features first.
    """
    squeeze = x.ndim == 2
    if squeeze:
        x = ops.reshape(x, (1,) + x.shape)
    if x.ndim != 3:
        raise ShapeError(f"bilstm_forward: expected [T, d] or [B, T, d], got {x.shape}")
    b, t_len, _ = x.shape
    if t_len < 1:
        raise ContractError("bilstm_forward: empty sequence")
    if lengths is None:
        lengths = [t_len] * b
    for layer in layers:
        if x.shape[-1] != layer.fwd.input_dim:
            raise ShapeError(f"bilstm_forward: feature dim {x.shape[-1]} != {layer.fwd.input_dim}")
        x = ops.dropout(x, dropout_rate, training, rng)
        x = ops.concat([lstm_direction(x, layer.fwd, lengths, reverse=False),
                        lstm_direction(x, layer.bwd, lengths, reverse=True)], axis=-1)
    if squeeze:
        x = ops.reshape(x, x.shape[1:])
    return x

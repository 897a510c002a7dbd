"""Multi-head cross-attention, its local band mask, and the two fusion operators.

The acoustic sequence supplies the queries; the linguistic sequence
supplies keys and values. With a band mask each query position ``t`` may
only attend to key positions ``u`` with ``|u - t| <= L // 2``.
"""

from __future__ import annotations

import math

import numpy as np

from .numerics import ops
from .numerics.module import Module, uniform_init
from .numerics.tensor import ContractError, ShapeError, Tensor


def band_mask(t_q: int, t_k: int, window: int) -> np.ndarray:
    """Boolean ``[t_q, t_k]`` matrix, true where ``t - L//2 <= u <= t + L//2``."""
    if window < 0:
        raise ContractError(f"band_mask: window must be >= 0, got {window}")
    half = window // 2
    t = np.arange(t_q)[:, None]
    u = np.arange(t_k)[None, :]
    return (u >= t - half) & (u <= t + half)


def attention_mask(t_q: int, t_k: int, window: int | None,
                   query_valid: np.ndarray | None = None,
                   key_valid: np.ndarray | None = None) -> np.ndarray | None:
    """Combine the band with key padding into a ``[B, t_q, t_k]`` (or ``[t_q, t_k]``) mask.

    Padded query rows are given every real key so their (discarded) outputs
    stay defined; a padded key is never attended to.
    """
    mask = None if window is None else band_mask(t_q, t_k, window)
    if key_valid is None:
        return mask
    key_valid = np.asarray(key_valid, dtype=bool)
    keys = key_valid[:, None, :]
    full = keys if mask is None else (mask[None] & keys)
    full = np.broadcast_to(full, (key_valid.shape[0], t_q, t_k)).copy()
    if query_valid is not None:
        pad_rows = ~np.asarray(query_valid, dtype=bool)
        full[pad_rows] = np.broadcast_to(keys, full.shape)[pad_rows]
    return full


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """``softmax(Q K^T / sqrt(d_k), mask) V``; masked energies behave as -inf."""
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise ShapeError(f"attention: Q {q.shape}, K {k.shape}, V {v.shape} are inconsistent")
    return ops.matmul(attention_weights(q, k, mask), v)


def attention_weights(q: Tensor, k: Tensor, mask: np.ndarray | None = None) -> Tensor:
    energies = ops.matmul(q, ops.transpose(k)) * (1.0 / math.sqrt(q.shape[-1]))
    return ops.softmax(energies, mask)


class MultiHeadAttention(Module):
    """Per-head projections stored side by side: columns ``i*d_k:(i+1)*d_k`` of
    ``w_q``/``w_k``/``w_v`` are head ``i``'s matrices. No biases."""

    def __init__(self, d_model: int, num_heads: int, rng: np.random.Generator):
        if num_heads < 1 or d_model % num_heads:
            raise ContractError(f"d_model={d_model} is not divisible by num_heads={num_heads}")
        self.d_model = d_model
        self.num_heads = num_heads
        self.w_q = uniform_init(rng, (d_model, d_model), d_model)
        self.w_k = uniform_init(rng, (d_model, d_model), d_model)
        self.w_v = uniform_init(rng, (d_model, d_model), d_model)
        self.w_o = uniform_init(rng, (d_model, d_model), d_model)

    @property
    def d_k(self) -> int:
        return self.d_model // self.num_heads

    def __call__(self, query_seq: Tensor, key_value_seq: Tensor, mask: np.ndarray | None = None) -> Tensor:
        return mha_forward(query_seq, key_value_seq, self, mask)


def mha_forward(query_seq: Tensor, key_value_seq: Tensor, params: MultiHeadAttention,
                mask: np.ndarray | None = None) -> Tensor:
    d = params.d_model
    if query_seq.shape[-1] != d or key_value_seq.shape[-1] != d:
        raise ShapeError(
            f"mha_forward: features {query_seq.shape[-1]}/{key_value_seq.shape[-1]} != d_model {d}")
    q = ops.matmul(query_seq, params.w_q)
    k = ops.matmul(key_value_seq, params.w_k)
    v = ops.matmul(key_value_seq, params.w_v)
    dk = params.d_k
    heads = []
    for i in range(params.num_heads):
        cols = (Ellipsis, slice(i * dk, (i + 1) * dk))
        heads.append(scaled_dot_attention(q[cols], k[cols], v[cols], mask))
    return ops.matmul(ops.concat(heads, axis=-1), params.w_o)


def fuse_add(daf_seq: Tensor, attn_out: Tensor) -> Tensor:
    if daf_seq.shape != attn_out.shape:
        raise ShapeError(f"fuse_add: shapes {daf_seq.shape} and {attn_out.shape} differ")
    return daf_seq + attn_out


def fuse_concat(daf_seq: Tensor, attn_out: Tensor) -> Tensor:
    if daf_seq.shape != attn_out.shape:
        raise ShapeError(f"fuse_concat: shapes {daf_seq.shape} and {attn_out.shape} differ")
    return ops.concat([daf_seq, attn_out], axis=-1)

"""Connectionist temporal classification: loss, greedy decoding, collapsing.

The blank symbol is always id 0. The loss runs the forward-backward
recursion over the blank-augmented label sequence entirely in log space and
returns the exact gradient with respect to the unnormalised logits.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .numerics.tensor import ContractError, Tensor

BLANK = 0


class InfeasibleAlignmentError(ValueError):
    """The frame count is too short for any CTC alignment of the labels."""


def required_length(labels: Sequence[int]) -> int:
    """Minimum number of frames able to emit ``labels``: one per label plus a blank between repeats."""
    labels = list(labels)
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def _log_softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _check_inputs(logits: np.ndarray, labels: Sequence[int]) -> np.ndarray:
    if logits.ndim != 2:
        raise ContractError(f"ctc: logits must be T x V, got shape {logits.shape}")
    t_len, vocab = logits.shape
    if t_len < 1 or vocab < 2:
        raise ContractError(f"ctc: need T >= 1 and V >= 2, got {logits.shape}")
    lab = np.asarray(labels, dtype=np.int64)
    if lab.size == 0:
        raise ContractError("ctc: label sequence is empty")
    if (lab <= BLANK).any() or (lab >= vocab).any():
        raise ContractError(f"ctc: label ids must lie in [1, {vocab}), got {lab.tolist()}")
    need = required_length(lab)
    if t_len < need:
        raise InfeasibleAlignmentError(
            f"ctc: {t_len} frames cannot emit {lab.size} labels (need >= {need})")
    return lab


def ctc_forward_backward(logits: np.ndarray, labels: Sequence[int]) -> tuple[float, np.ndarray]:
    """Return ``(-log P(labels | logits), d loss / d logits)``."""
    logits = np.asarray(logits, dtype=np.float64)
    lab = _check_inputs(logits, labels)
    t_len = logits.shape[0]
    logp = _log_softmax(logits)

    ext = np.zeros(2 * lab.size + 1, dtype=np.int64)
    ext[1::2] = lab
    n_states = ext.size
    # s -> s+2 transition is allowed when it skips a blank between different labels
    skip = np.zeros(n_states, dtype=bool)
    skip[2:] = (ext[2:] != BLANK) & (ext[2:] != ext[:-2])
    emit = logp[:, ext]  # T x S

    neg_inf = -np.inf
    alpha = np.full((t_len, n_states), neg_inf)
    alpha[0, 0] = emit[0, 0]
    alpha[0, 1] = emit[0, 1]
    for t in range(1, t_len):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha[t] = acc + emit[t]

    beta = np.full((t_len, n_states), neg_inf)
    beta[-1, -1] = emit[-1, -1]
    beta[-1, -2] = emit[-1, -2]
    for t in range(t_len - 2, -1, -1):
        nxt = beta[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[:-2] = np.where(skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc + emit[t]

    log_like = np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    # both alpha and beta include the emission at t, so remove it once
    with np.errstate(invalid="ignore"):
        log_gamma = alpha + beta - emit - log_like
    gamma = np.exp(np.where(np.isfinite(log_gamma), log_gamma, neg_inf))
    occupancy = np.zeros_like(logits)
    np.add.at(occupancy, (slice(None), ext), gamma)
    grad = np.exp(logp) - occupancy
    return float(-log_like), grad


def ctc_loss(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """Differentiable CTC negative log-likelihood for one ``T x V`` logits matrix."""
    loss, grad = ctc_forward_backward(logits.data, labels)
    return Tensor._from_op(np.asarray(loss), (logits,), lambda g: (g * grad,), "ctc_loss")


def ctc_loss_batch(logits: Tensor, lengths: Sequence[int], labels: Sequence[Sequence[int]]) -> Tensor:
    """Mean CTC loss over a padded ``[B, T, V]`` batch; frames past each length are ignored."""
    b = logits.shape[0]
    if len(lengths) != b or len(labels) != b:
        raise ContractError("ctc_loss_batch: lengths/labels do not match batch size")
    full = np.zeros(logits.shape)
    total = 0.0
    for i, (n, lab) in enumerate(zip(lengths, labels)):
        loss, grad = ctc_forward_backward(logits.data[i, :n], lab)
        total += loss
        full[i, :n] = grad / b
    return Tensor._from_op(np.asarray(total / b), (logits,), lambda g: (g * full,), "ctc_loss_batch")


def per_frame_argmax(logits) -> list[int]:
    """Best symbol per frame; numpy's argmax already breaks ties toward the smallest id."""
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    return [int(i) for i in np.argmax(data, axis=-1)]


def collapse(frame_ids: Sequence[int]) -> list[int]:
    """Merge adjacent repeats, then drop blanks."""
    out: list[int] = []
    prev = None
    for sym in frame_ids:
        if sym != prev and sym != BLANK:
            out.append(int(sym))
        prev = sym
    return out


def greedy_decode(logits) -> list[int]:
    return collapse(per_frame_argmax(logits))

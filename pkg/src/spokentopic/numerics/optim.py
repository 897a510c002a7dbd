"""Adam with bias correction and per-group learning rates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .tensor import ContractError, Tensor


@dataclass
class AdamState:
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, Tensor], state: AdamState,
              lr: Mapping[str, float] | None = None) -> AdamState:
    """Apply one Adam update in place to every tensor in ``params``.

    ``lr`` optionally overrides ``state.alpha`` per parameter name. A
    parameter without a gradient is an error: after a backward pass every
    trainable tensor is expected to have been reached.
    """
    for name, p in params.items():
        if p.grad is None:
            raise ContractError(f"adam_step: parameter {name!r} has no gradient")
        if p.grad.shape != p.shape:
            raise ContractError(f"adam_step: gradient shape {p.grad.shape} != {p.shape} for {name!r}")
    state.t += 1
    b1, b2, t = state.beta1, state.beta2, state.t
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = p.grad
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros(p.shape)
            v = np.zeros(p.shape)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name], state.v[name] = m, v
        alpha = state.alpha if lr is None else lr.get(name, state.alpha)
        p.data = p.data - alpha * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    return state


def clip_grad_norm(params: Mapping[str, Tensor], max_norm: float) -> float:
    total = float(np.sqrt(sum(float((p.grad ** 2).sum()) for p in params.values() if p.grad is not None)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params.values():
            if p.grad is not None:
                p.grad = p.grad * scale
    return total

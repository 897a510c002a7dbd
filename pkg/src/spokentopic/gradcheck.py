"""Central finite-difference checks of tape gradients.

Each suite builds a small seeded instance, differentiates a scalar loss
on the tape, perturbs every input entry by +-step, and reports the maximum
relative error ``|a - n| / max(|a|, |n|, floor)``. The floor keeps
entries whose true gradient is ~0 from dividing round-off by round-off.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .numerics import ops
from .numerics.tensor import Tensor

STEP = 1e-5
FLOOR = 1e-6
TOLERANCE = 1e-4


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = FLOOR) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def numerical_gradient(loss_fn: Callable[[], float], arr: np.ndarray, step: float = STEP) -> np.ndarray:
    grad = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = loss_fn()
        flat[i] = orig - step
        down = loss_fn()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * step)
    return grad


def check_gradients(build_loss: Callable[[], Tensor], inputs: dict[str, Tensor],
                    step: float = STEP) -> dict[str, float]:
    """Per-input max relative error between tape and finite-difference gradients."""
    for t in inputs.values():
        t.grad = None
    build_loss().backward()
    analytic = {k: t.grad.copy() if t.grad is not None else np.zeros(t.shape) for k, t in inputs.items()}

    def value() -> float:
        return build_loss().item()

    return {k: relative_error(analytic[k], numerical_gradient(value, t.data, step))
            for k, t in inputs.items()}


def _param(rng, *shape, scale=1.0) -> Tensor:
    return Tensor(rng.normal(scale=scale, size=shape), requires_grad=True)


def _weighted(out: Tensor, rng) -> Callable[[Tensor], Tensor]:
    weights = rng.normal(size=out.shape)
    return lambda y: ops.sum(y * weights)


# --- suites ----------------------------------------------------------------

def suite_softmax(seed: int) -> dict[str, float]:
    rng = np.random.default_rng(seed)
    x = _param(rng, 3, 5)
    mask = rng.random((3, 5)) > 0.3
    mask[:, 0] = True
    w = rng.normal(size=(3, 5))
    return check_gradients(lambda: ops.sum(ops.softmax(x, mask) * w), {"x": x})


def suite_layer_norm(seed: int) -> dict[str, float]:
    from .numerics.ops import layer_norm
    rng = np.random.default_rng(seed)
    x, gain, bias = _param(rng, 4, 6), _param(rng, 6), _param(rng, 6)
    w = rng.normal(size=(4, 6))
    return check_gradients(lambda: ops.sum(layer_norm(x, gain, bias, 1e-5) * w),
                           {"x": x, "gain": gain, "bias": bias})


def suite_matmul(seed: int) -> dict[str, float]:
    rng = np.random.default_rng(seed)
    a, b = _param(rng, 2, 3, 4), _param(rng, 4, 5)
    c = _param(rng, 2, 5, 3)
    w = rng.normal(size=(2, 3, 3))
    return check_gradients(lambda: ops.sum(ops.matmul(ops.matmul(a, b), c) * w),
                           {"a": a, "b": b, "c": c})


def suite_lstm_cell(seed: int) -> dict[str, float]:
    from .recurrent import LstmLayer, lstm_cell_step
    rng = np.random.default_rng(seed)
    layer = LstmLayer(3, 4, rng)
    x, h, c = _param(rng, 3), _param(rng, 4), _param(rng, 4)
    wh, wc = rng.normal(size=4), rng.normal(size=4)

    def loss():
        h_t, c_t = lstm_cell_step(x, h, c, layer)
        return ops.sum(h_t * wh) + ops.sum(c_t * wc)

    inputs = {"x": x, "h_prev": h, "c_prev": c, **{f"layer.{k}": v for k, v in layer.parameters().items()}}
    return check_gradients(loss, inputs)


def suite_bilstm(seed: int) -> dict[str, float]:
    from .recurrent import BiLstm
    rng = np.random.default_rng(seed)
    net = BiLstm(2, 3, 2, rng)
    x = _param(rng, 2, 3, 2)
    lengths = [3, 2]
    w = rng.normal(size=(2, 3, 6)) * np.array([[1, 1, 1], [1, 1, 0]])[..., None]
    inputs = {"x": x, **net.parameters()}
    return check_gradients(lambda: ops.sum(net(x, lengths) * w), inputs)


def suite_mha_banded(seed: int) -> dict[str, float]:
    from .attention import MultiHeadAttention, band_mask
    rng = np.random.default_rng(seed)
    mha = MultiHeadAttention(4, 2, rng)
    q, kv = _param(rng, 5, 4), _param(rng, 5, 4)
    mask = band_mask(5, 5, 2)
    w = rng.normal(size=(5, 4))
    inputs = {"query": q, "key_value": kv, **mha.parameters()}
    return check_gradients(lambda: ops.sum(mha(q, kv, mask) * w), inputs)


def suite_ctc(seed: int) -> dict[str, float]:
    from .ctc import ctc_loss
    rng = np.random.default_rng(seed)
    t_len = int(rng.integers(3, 6))
    logits = _param(rng, t_len, 4)
    labels = [int(v) for v in rng.integers(1, 4, size=int(rng.integers(1, 3)))]
    return check_gradients(lambda: ctc_loss(logits, labels), {"logits": logits})


def micro_config():
    from .config import ModelConfig
    return ModelConfig(d_feat=3, phoneme_vocab=3, word_vocab=3, num_topics=3, input_proj_dim=3,
                       a2p_layers=1, a2p_hidden=2, p2w_layers=1, p2w_hidden=2, head_hidden=3,
                       head_fc_dim=5, num_heads=2, window=2, max_len=6, a2p_dropout=0.0,
                       p2w_dropout=0.0, head_dropout=0.0)


def suite_fusion_head(seed: int, variant: str = "lmha_add") -> dict[str, float]:
    """Whole fusion + topic head on a micro configuration (d=4, T=6, 2 heads, L=2)."""
    from .pipeline import build_system
    rng = np.random.default_rng(seed)
    cfg = micro_config()
    system = build_system(variant, cfg, rng)
    daf, dlf = _param(rng, 2, 6, 4), _param(rng, 2, 6, 4)
    mask = np.ones((2, 6), dtype=bool)
    mask[1, 4:] = False
    topics = [int(v) for v in rng.integers(0, cfg.num_topics, size=2)]
    inputs = {"daf": daf, "dlf": dlf, **system.parameters()}
    return check_gradients(lambda: ops.nll(system(daf, dlf, mask), topics), inputs)


SUITES: dict[str, Callable[[int], dict[str, float]]] = {
    "softmax": suite_softmax,
    "layer_norm": suite_layer_norm,
    "matmul": suite_matmul,
    "lstm_cell": suite_lstm_cell,
    "bilstm": suite_bilstm,
    "mha_banded": suite_mha_banded,
    "ctc_loss": suite_ctc,
    "fusion_head": suite_fusion_head,
}


def run_all(seeds=(0, 1, 2)) -> dict[str, float]:
    """Max relative error per suite over the given seeds."""
    return {name: max(max(suite(s).values()) for s in seeds) for name, suite in SUITES.items()}

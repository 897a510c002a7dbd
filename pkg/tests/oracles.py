"""Independent reference implementations used as test oracles.

Nothing here imports the package's numerical code; each routine is a slow,
direct transcription of the definition it checks against.
"""

import itertools
import math

import numpy as np


def collapse_path(path):
    out, prev = [], None
    for sym in path:
        if sym != prev and sym != 0:
            out.append(sym)
        prev = sym
    return out


def brute_force_ctc_probability(logits, labels):
    """Sum of path probabilities over every V**T frame path that collapses to ``labels``."""
    logits = np.asarray(logits, dtype=np.float64)
    t_len, vocab = logits.shape
    probs = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)
    labels = list(labels)
    terms = []
    for path in itertools.product(range(vocab), repeat=t_len):
        if collapse_path(path) == labels:
            terms.append(math.prod(probs[t, s] for t, s in enumerate(path)))
    return math.fsum(terms)


def naive_attention(q, k, v, mask=None):
    """Row-by-row exp / normalise / weighted sum with Python loops."""
    q, k, v = (np.asarray(a, dtype=np.float64) for a in (q, k, v))
    out = np.zeros((q.shape[0], v.shape[1]))
    scale = 1.0 / math.sqrt(q.shape[1])
    for t in range(q.shape[0]):
        allowed = [u for u in range(k.shape[0]) if mask is None or mask[t][u]]
        energies = [scale * math.fsum(q[t, j] * k[u, j] for j in range(q.shape[1])) for u in allowed]
        top = max(energies)
        weights = [math.exp(e - top) for e in energies]
        norm = math.fsum(weights)
        for w, u in zip(weights, allowed):
            out[t] += (w / norm) * v[u]
    return out


def explicit_heads_mha(x_q, x_kv, w_q, w_k, w_v, w_o, num_heads, mask=None):
    """Multi-head attention with every head's projection materialised separately."""
    d = w_q.shape[0]
    dk = d // num_heads
    heads = []
    for i in range(num_heads):
        cols = slice(i * dk, (i + 1) * dk)
        wq_i, wk_i, wv_i = w_q[:, cols].copy(), w_k[:, cols].copy(), w_v[:, cols].copy()
        heads.append(naive_attention(x_q @ wq_i, x_kv @ wk_i, x_kv @ wv_i, mask))
    return np.hstack(heads) @ w_o


def _sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def scalar_lstm_step(x, h, c, w_ih, w_hh, bias):
    """One LSTM step with explicit scalar loops; gate order i, f, g, o."""
    hid = len(h)
    z = [bias[j] + math.fsum(x[a] * w_ih[a][j] for a in range(len(x)))
         + math.fsum(h[a] * w_hh[a][j] for a in range(hid)) for j in range(4 * hid)]
    h_new, c_new = [], []
    for j in range(hid):
        i_g = _sig(z[j])
        f_g = _sig(z[hid + j])
        g_g = math.tanh(z[2 * hid + j])
        o_g = _sig(z[3 * hid + j])
        c_j = f_g * c[j] + i_g * g_g
        c_new.append(c_j)
        h_new.append(o_g * math.tanh(c_j))
    return h_new, c_new


def scalar_lstm_sequence(xs, w_ih, w_hh, bias):
    hid = len(w_hh)
    h, c, outs = [0.0] * hid, [0.0] * hid, []
    for x in xs:
        h, c = scalar_lstm_step(x, h, c, w_ih, w_hh, bias)
        outs.append(h)
    return np.array(outs)

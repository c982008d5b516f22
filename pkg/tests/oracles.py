"""Independent oracles used across the test suite.

Everything here is deliberately written without the package's tensor or
alignment machinery: pure-python scalar loops and exhaustive recursion,
so agreement with the library is a real cross-check.
"""

import math
from functools import lru_cache

import numpy as np


def scalar_lstm_step(x, h_prev, c_prev, W, U, b, hidden):
    """One LSTM step with explicit scalar loops; gate order [i; f; g; o]."""

    def sig(z):
        return 1.0 / (1.0 + math.exp(-z))

    gates = []
    for r in range(4 * hidden):
        acc = b[r]
        for k in range(len(x)):
            acc += W[r][k] * x[k]
        for k in range(hidden):
            acc += U[r][k] * h_prev[k]
        gates.append(acc)
    i = [sig(gates[r]) for r in range(hidden)]
    f = [sig(gates[hidden + r]) for r in range(hidden)]
    g = [math.tanh(gates[2 * hidden + r]) for r in range(hidden)]
    o = [sig(gates[3 * hidden + r]) for r in range(hidden)]
    c = [f[r] * c_prev[r] + i[r] * g[r] for r in range(hidden)]
    h = [o[r] * math.tanh(c[r]) for r in range(hidden)]
    return h, c


def scalar_model_logprobs(ids, ckpt):
    """Per-character log P(y_i | SOS, y_1..i-1) via the scalar-loop cell."""
    cfg = ckpt.config
    hidden, v = cfg.hidden_size, cfg.vocab_size
    h = [[0.0] * hidden for _ in range(cfg.num_layers)]
    c = [[0.0] * hidden for _ in range(cfg.num_layers)]
    inputs = [ckpt.vocab.space_id] + list(ids[:-1])
    out = []
    for t, (x_id, y_id) in enumerate(zip(inputs, ids)):
        x = [0.0] * v
        x[x_id] = 1.0
        for layer in range(1, cfg.num_layers + 1):
            W = ckpt.params[f"W_{layer}"]
            U = ckpt.params[f"U_{layer}"]
            b = ckpt.params[f"b_{layer}"]
            h[layer - 1], c[layer - 1] = scalar_lstm_step(
                x, h[layer - 1], c[layer - 1], W, U, b, hidden
            )
            x = h[layer - 1]
        logits = [
            sum(ckpt.params["W_out"][r][k] * x[k] for k in range(hidden))
            + ckpt.params["b_out"][r]
            for r in range(v)
        ]
        m = max(logits)
        lse = m + math.log(sum(math.exp(z - m) for z in logits))
        out.append(logits[y_id] - lse)
    return out


def scalar_adam(theta, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Run Adam on one scalar parameter over a list of gradients."""
    m = v = 0.0
    t = 0
    for g in grads:
        t += 1
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        theta -= lr * m_hat / (math.sqrt(v_hat) + eps)
    return theta


def brute_force_edit_distance(ref, hyp):
    """Exhaustive minimal-edit search by plain recursion (no DP table)."""
    ref, hyp = tuple(ref), tuple(hyp)

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(ref):
            return len(hyp) - j
        if j == len(hyp):
            return len(ref) - i
        best = go(i + 1, j + 1) + (0 if ref[i] == hyp[j] else 1)
        best = min(best, go(i + 1, j) + 1)  # deletion of ref[i]
        best = min(best, go(i, j + 1) + 1)  # insertion of hyp[j]
        return best

    return go(0, 0)


def two_row_levenshtein(a, b):
    """Independent two-row character Levenshtein."""
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def make_chain(k=4, conc=1.0, seed=7):
    """Fixed random order-1 Markov chain with its stationary distribution and
    entropy rate (nats/char)."""
    rng = np.random.default_rng(seed)
    P = rng.dirichlet([conc] * k, size=k)
    pi = np.ones(k) / k
    for _ in range(5000):
        pi = pi @ P
    H = -float((pi[:, None] * P * np.log(P)).sum())
    return P, pi, H


def sample_chain_corpus(P, pi, n_lines, line_len, seed):
    k = P.shape[0]
    rng = np.random.default_rng(seed)
    letters = [chr(ord("a") + i) for i in range(k)]
    lines = []
    for _ in range(n_lines):
        s = rng.choice(k, p=pi)
        chars = [letters[s]]
        for _ in range(line_len - 1):
            s = rng.choice(k, p=P[s])
            chars.append(letters[s])
        lines.append("".join(chars))
    return lines

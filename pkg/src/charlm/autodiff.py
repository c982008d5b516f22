"""Minimal dense float64 tensors with tape-based reverse-mode autodiff.

Just enough surface for a multi-layer LSTM with a softmax output: matmul,
elementwise add/mul, sigmoid, tanh, transpose, row concat, column slicing,
reductions, and a fused softmax cross-entropy. Each op records a backward
closure when any input requires gradients; the tape is the implicit graph
of parent links and is discarded once backward() has run.

Broadcasting is restricted to adding a trailing 1-D bias vector; everything
else must match shapes exactly so shape bugs fail loudly.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NumericError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        arr = np.asarray(data, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise NumericError("non-finite values in tensor")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def backward(self) -> None:
        """Accumulate gradients of this scalar w.r.t. every reachable tensor."""
        if self.data.size != 1:
            raise NumericError(
                f"backward() requires a scalar, got shape {self.data.shape}"
            )
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad or p._parents:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def zero_grad(self) -> None:
        self.grad = None


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _tracked(*ts: Tensor) -> bool:
    return any(t.requires_grad or t._parents for t in ts)


def _make(data, parents: tuple, backward: Callable | None) -> Tensor:
    if backward is not None and _tracked(*parents):
        return Tensor(data, _parents=parents, _backward=backward)
    return Tensor(data)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise NumericError(
            f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}"
        )
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad or a._parents:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad or b._parents:
            _accumulate(b, a.data.T @ g)

    return _make(out_data, (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; b may be a 1-D bias broadcast over trailing dim."""
    bias = b.data.ndim == 1 and a.data.ndim == 2 and a.data.shape[1] == b.data.shape[0]
    if not bias and a.data.shape != b.data.shape:
        raise NumericError(f"add shape mismatch: {a.data.shape} + {b.data.shape}")
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad or a._parents:
            _accumulate(a, g)
        if b.requires_grad or b._parents:
            _accumulate(b, g.sum(axis=0) if bias else g)

    return _make(out_data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise NumericError(f"mul shape mismatch: {a.data.shape} * {b.data.shape}")
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad or a._parents:
            _accumulate(a, g * b.data)
        if b.requires_grad or b._parents:
            _accumulate(b, g * a.data)

    return _make(out_data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    out_data = a.data * c

    def backward(g):
        _accumulate(a, g * c)

    return _make(out_data, (a,), backward)


def sigmoid(x: Tensor) -> Tensor:
    out_data = np.empty_like(x.data)
    pos = x.data >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    e = np.exp(x.data[~pos])
    out_data[~pos] = e / (1.0 + e)

    def backward(g):
        _accumulate(x, g * out_data * (1.0 - out_data))

    return _make(out_data, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)

    def backward(g):
        _accumulate(x, g * (1.0 - out_data * out_data))

    return _make(out_data, (x,), backward)


def transpose(x: Tensor) -> Tensor:
    out_data = x.data.T

    def backward(g):
        _accumulate(x, g.T)

    return _make(out_data, (x,), backward)


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[1]:
        raise NumericError(
            f"concat_rows shape mismatch: {a.data.shape} vs {b.data.shape}"
        )
    out_data = np.concatenate([a.data, b.data], axis=0)
    na = a.data.shape[0]

    def backward(g):
        if a.requires_grad or a._parents:
            _accumulate(a, g[:na])
        if b.requires_grad or b._parents:
            _accumulate(b, g[na:])

    return _make(out_data, (a, b), backward)


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    if x.data.ndim == 1:
        out_data = x.data[start:stop].copy()
    elif x.data.ndim == 2:
        out_data = x.data[:, start:stop].copy()
    else:
        raise NumericError(f"slice_cols expects 1-D or 2-D, got {x.data.shape}")

    def backward(g):
        full = np.zeros_like(x.data)
        if x.data.ndim == 1:
            full[start:stop] = g
        else:
            full[:, start:stop] = g
        _accumulate(x, full)

    return _make(out_data, (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    out_data = np.array(x.data.sum())

    def backward(g):
        _accumulate(x, np.full_like(x.data, float(g)))

    return _make(out_data, (x,), backward)


def log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Numerically stable row-wise log-softmax (plain numpy; no tape)."""
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(
    logits: Tensor,
    targets: Sequence[int],
    mask: np.ndarray | None = None,
    reduction: str = "mean",
) -> Tensor:
    """Cross entropy of logits [N, V] against integer targets.

    mask, if given, is a 0/1 weight per row; masked-out rows contribute
    nothing. reduction 'mean' divides by the number of active rows,
    'sum' leaves the raw total.
    """
    targets = np.asarray(targets, dtype=np.int64)
    n, v = logits.data.shape
    if targets.shape != (n,):
        raise NumericError(f"targets shape {targets.shape} != ({n},)")
    # ignore=-1 rows are only legal when masked out
    active = np.ones(n) if mask is None else np.asarray(mask, dtype=np.float64)
    checked = targets[active > 0]
    if checked.size and (checked.min() < 0 or checked.max() >= v):
        raise NumericError(f"target id out of range for {v} classes")
    safe_targets = np.where(active > 0, targets, 0)

    logp = log_softmax_rows(logits.data)
    picked = logp[np.arange(n), safe_targets]
    total = -(picked * active).sum()
    count = active.sum()
    if reduction == "mean":
        if count == 0:
            raise NumericError("softmax_cross_entropy: no active rows")
        out_val = total / count
        denom = count
    elif reduction == "sum":
        out_val = total
        denom = 1.0
    else:
        raise ValueError(f"unknown reduction {reduction!r}")

    def backward(g):
        probs = np.exp(logp)
        probs[np.arange(n), safe_targets] -= 1.0
        probs *= (active / denom)[:, None]
        _accumulate(logits, float(g) * probs)

    return _make(np.array(out_val), (logits,), backward)


def finite_diff_grad(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient oracle: (f(x+εe_i) - f(x-εe_i)) / 2ε."""
    base = x.data.copy()
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(Tensor(base)).data)
        flat[i] = orig - eps
        fm = float(f(Tensor(base)).data)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad

"""Character-level LSTM language model.

Three stacked LSTM layers (gate order [i; f; g; o]) over one-hot character
inputs, a linear layer to the character set, inverted dropout after the
input and after each layer, Adam with global-norm gradient clipping, and
checkpointing on the lowest validation perplexity.

Training interprets the configured epoch budget as optimizer steps by
default (epochs_are_steps=True); set it False for full corpus passes.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field, asdict, replace
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import Vocabulary, build_vocab, chunk_corpus, encode
from .errors import (
    BadMagicError,
    DataError,
    NumericError,
    ShapeMismatchError,
    TruncatedCheckpointError,
    UnsupportedVersionError,
)

CHECKPOINT_MAGIC = b"CLMR"
CHECKPOINT_VERSION = 1


@dataclass
class LmConfig:
    vocab_size: int = 0  # filled in from the training vocabulary
    hidden_size: int = 200
    num_layers: int = 3
    dropout_p: float = 0.2
    learning_rate: float = 0.001
    batch_size: int = 256
    clip: float = 1.0
    max_seq_len: int = 100
    max_epochs: int = 10000
    seed: int = 0
    epochs_are_steps: bool = True
    clip_mode: str = "norm"  # "norm" (global L2) or "value" (per element)
    eval_every: int = 100  # steps between validation evals in steps mode

    def validate(self) -> None:
        if self.hidden_size <= 0 or self.num_layers <= 0 or self.batch_size <= 0:
            raise DataError("hidden_size, num_layers, batch_size must be positive")
        if not (0.0 <= self.dropout_p < 1.0):
            raise DataError("dropout_p must be in [0, 1)")
        if self.learning_rate <= 0 or self.clip <= 0 or self.max_seq_len <= 0:
            raise DataError("learning_rate, clip, max_seq_len must be positive")
        if self.max_epochs <= 0 or self.eval_every <= 0:
            raise DataError("max_epochs and eval_every must be positive")
        if self.clip_mode not in ("norm", "value"):
            raise DataError(f"unknown clip_mode {self.clip_mode!r}")


def param_order(num_layers: int) -> list[str]:
    """Fixed parameter order used everywhere (iteration, checkpoint layout)."""
    names = []
    for layer in range(1, num_layers + 1):
        names += [f"W_{layer}", f"U_{layer}", f"b_{layer}"]
    names += ["W_out", "b_out"]
    return names


def param_shapes(config: LmConfig) -> dict[str, tuple[int, ...]]:
    h, v = config.hidden_size, config.vocab_size
    shapes: dict[str, tuple[int, ...]] = {}
    for layer in range(1, config.num_layers + 1):
        in_dim = v if layer == 1 else h
        shapes[f"W_{layer}"] = (4 * h, in_dim)
        shapes[f"U_{layer}"] = (4 * h, h)
        shapes[f"b_{layer}"] = (4 * h,)
    shapes["W_out"] = (v, h)
    shapes["b_out"] = (v,)
    return shapes


def init_params(config: LmConfig, rng: np.random.Generator | None = None) -> dict[str, np.ndarray]:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) weights, zero biases with the forget-gate
    slice set to 1.0."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    h = config.hidden_size
    k = 1.0 / np.sqrt(h)
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(config).items():
        if name.startswith("b"):
            arr = np.zeros(shape)
            if name.startswith("b_") and name != "b_out":
                arr[h : 2 * h] = 1.0
        else:
            arr = rng.uniform(-k, k, size=shape)
        params[name] = arr
    return params


def lstm_cell_forward(
    x: Tensor,
    h_prev: Tensor,
    c_prev: Tensor,
    w: Tensor,
    u: Tensor,
    b: Tensor,
    hidden_size: int,
) -> tuple[Tensor, Tensor]:
    """One LSTM step for a batch: x [B, in], h_prev/c_prev [B, H]."""
    gates = ad.add(ad.add(ad.matmul(x, ad.transpose(w)), ad.matmul(h_prev, ad.transpose(u))), b)
    h = hidden_size
    i = ad.sigmoid(ad.slice_cols(gates, 0, h))
    f = ad.sigmoid(ad.slice_cols(gates, h, 2 * h))
    g = ad.tanh(ad.slice_cols(gates, 2 * h, 3 * h))
    o = ad.sigmoid(ad.slice_cols(gates, 3 * h, 4 * h))
    c = ad.add(ad.mul(f, c_prev), ad.mul(i, g))
    h_out = ad.mul(o, ad.tanh(c))
    return h_out, c


def one_hot(ids: np.ndarray, vocab_size: int) -> np.ndarray:
    """Rows for id -1 (padding) are all-zero."""
    out = np.zeros((len(ids), vocab_size))
    valid = ids >= 0
    out[np.where(valid)[0], ids[valid]] = 1.0
    return out


def forward(
    batch: np.ndarray,
    params: dict[str, np.ndarray] | dict[str, Tensor],
    config: LmConfig,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    state: tuple[list[Tensor], list[Tensor]] | None = None,
) -> tuple[list[Tensor], tuple[list[Tensor], list[Tensor]]]:
    """Run the stacked LSTM over batch [B, T] of character ids (-1 = pad).

    Returns per-timestep logit tensors ([B, |V|] each) and the final
    (h, c) state per layer. Hidden state starts at zeros unless `state`
    is given. Train mode applies inverted dropout and needs an rng.
    """
    if mode not in ("train", "eval"):
        raise DataError(f"unknown forward mode {mode!r}")
    if mode == "train" and config.dropout_p > 0 and rng is None:
        raise DataError("train-mode forward requires a dropout rng")
    batch = np.asarray(batch, dtype=np.int64)
    if batch.max(initial=-1) >= config.vocab_size:
        raise DataError(f"character id out of range for vocab size {config.vocab_size}")
    bsz, seq_len = batch.shape
    h = config.hidden_size
    p = {k: (v if isinstance(v, Tensor) else Tensor(v)) for k, v in params.items()}
    wt = {}  # transpose once per forward pass, reused across timesteps

    if state is None:
        hs = [Tensor(np.zeros((bsz, h))) for _ in range(config.num_layers)]
        cs = [Tensor(np.zeros((bsz, h))) for _ in range(config.num_layers)]
    else:
        hs, cs = list(state[0]), list(state[1])

    drop = config.dropout_p if mode == "train" else 0.0
    keep = 1.0 - drop

    def dropout(t: Tensor) -> Tensor:
        if drop == 0.0:
            return t
        mask = (rng.random(t.data.shape) < keep) / keep
        return ad.mul(t, Tensor(mask))

    logits: list[Tensor] = []
    for t in range(seq_len):
        x = dropout(Tensor(one_hot(batch[:, t], config.vocab_size)))
        for layer in range(1, config.num_layers + 1):
            w, u, b = p[f"W_{layer}"], p[f"U_{layer}"], p[f"b_{layer}"]
            hs[layer - 1], cs[layer - 1] = lstm_cell_forward(
                x, hs[layer - 1], cs[layer - 1], w, u, b, h
            )
            x = dropout(hs[layer - 1])
        if "W_out_T" not in wt:
            wt["W_out_T"] = ad.transpose(p["W_out"])
        logits.append(ad.add(ad.matmul(x, wt["W_out_T"]), p["b_out"]))
    return logits, (hs, cs)


def clip_gradients(grads: dict[str, np.ndarray], clip: float = 1.0, mode: str = "norm") -> dict[str, np.ndarray]:
    """Global-L2-norm clipping (default) or per-element value clipping."""
    if mode == "value":
        return {k: np.clip(g, -clip, clip) for k, g in grads.items()}
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > clip:
        factor = clip / total
        return {k: g * factor for k, g in grads.items()}
    return grads


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> None:
    """In-place Adam update with bias correction."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for k, g in grads.items():
        state.m[k] = b1 * state.m[k] + (1.0 - b1) * g
        state.v[k] = b2 * state.v[k] + (1.0 - b2) * (g * g)
        m_hat = state.m[k] / bc1
        v_hat = state.v[k] / bc2
        params[k] -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class LmCheckpoint:
    config: LmConfig
    params: dict[str, np.ndarray]
    vocab: Vocabulary
    best_val_perplexity: float
    epoch_of_best: int


class TrainingDiverged(NumericError):
    """NaN/Inf appeared during training; carries the last good checkpoint."""

    def __init__(self, message: str, last_checkpoint: LmCheckpoint | None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint


def _make_batches(
    chunks: list[list[int]], batch_size: int, rng: np.random.Generator
) -> list[list[list[int]]]:
    order = rng.permutation(len(chunks))
    return [
        [chunks[i] for i in order[s : s + batch_size]]
        for s in range(0, len(order), batch_size)
    ]


def _pad_batch(seqs: list[list[int]], space_id: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Build (inputs, targets, mask) with a whitespace SOS prefix per chunk.

    inputs[i] = [SOS] + seq[:-1]; targets[i] = seq; padded with -1 and a
    0/1 mask so padded positions drop out of the loss.
    """
    max_len = max(len(s) for s in seqs)
    bsz = len(seqs)
    inputs = np.full((bsz, max_len), -1, dtype=np.int64)
    targets = np.full((bsz, max_len), -1, dtype=np.int64)
    mask = np.zeros((bsz, max_len))
    for i, s in enumerate(seqs):
        n = len(s)
        inputs[i, 0] = space_id
        if n > 1:
            inputs[i, 1:n] = s[:-1]
        targets[i, :n] = s
        mask[i, :n] = 1.0
    return inputs, targets, mask


def batch_loss(
    inputs: np.ndarray,
    targets: np.ndarray,
    mask: np.ndarray,
    params: dict[str, Tensor],
    config: LmConfig,
    mode: str = "train",
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Mean next-character cross entropy over unmasked positions."""
    logits, _ = forward(inputs, params, config, mode=mode, rng=rng)
    total = None
    for t, lt in enumerate(logits):
        part = ad.softmax_cross_entropy(lt, targets[:, t], mask=mask[:, t], reduction="sum")
        total = part if total is None else ad.add(total, part)
    return ad.scale(total, 1.0 / mask.sum())


def _snapshot(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in params.items()}


def train(
    train_lines: Sequence[str],
    valid_lines: Sequence[str],
    config: LmConfig,
    curve_path=None,
    log: Callable[[str], None] | None = None,
) -> LmCheckpoint:
    """Train on chunked lines, checkpoint on lowest validation perplexity.

    Deterministic given config.seed. Emits a training curve CSV
    (epoch,train_loss,val_ppl) when curve_path is given.
    """
    if not train_lines or not any(train_lines):
        raise DataError("empty training corpus")
    if not valid_lines:
        raise DataError("empty validation corpus")
    config.validate()
    vocab = build_vocab(train_lines)
    config = replace(config, vocab_size=len(vocab))
    chunks = [encode(c, vocab) for c in chunk_corpus(train_lines, config.max_seq_len) if c]
    if not chunks:
        raise DataError("training corpus has no nonempty lines")

    rng = np.random.default_rng(config.seed)
    params = init_params(config, rng)
    adam = AdamState.for_params(params)
    best: LmCheckpoint | None = None
    curve_rows: list[tuple[int, float, float]] = []

    total_steps = config.max_epochs if config.epochs_are_steps else None
    total_passes = None if config.epochs_are_steps else config.max_epochs

    step = 0
    pass_no = 0
    loss_acc: list[float] = []

    def evaluate(label: int) -> None:
        nonlocal best
        val_ppl = perplexity(
            valid_lines, LmCheckpoint(config, params, vocab, 0.0, 0)
        )
        train_loss = float(np.mean(loss_acc)) if loss_acc else float("nan")
        loss_acc.clear()
        curve_rows.append((label, train_loss, val_ppl))
        if log:
            log(f"epoch {label}: train_loss {train_loss:.4f} val_ppl {val_ppl:.4f}")
        if best is None or val_ppl < best.best_val_perplexity:
            best = LmCheckpoint(config, _snapshot(params), vocab, val_ppl, label)

    try:
        done = False
        while not done:
            pass_no += 1
            for batch_seqs in _make_batches(chunks, config.batch_size, rng):
                inputs, targets, mask = _pad_batch(batch_seqs, vocab.space_id)
                tparams = {k: Tensor(v, requires_grad=True) for k, v in params.items()}
                loss = batch_loss(inputs, targets, mask, tparams, config, mode="train", rng=rng)
                loss.backward()
                grads = {k: t.grad for k, t in tparams.items()}
                grads = clip_gradients(grads, config.clip, config.clip_mode)
                adam_step(params, grads, adam, config.learning_rate)
                loss_acc.append(loss.item())
                step += 1
                if total_steps is not None:
                    if step % config.eval_every == 0 or step == total_steps:
                        evaluate(step)
                    if step >= total_steps:
                        done = True
                        break
            if not done and total_passes is not None:
                evaluate(pass_no)
                if pass_no >= total_passes:
                    done = True
    except NumericError as exc:
        raise TrainingDiverged(f"training diverged: {exc}", best) from exc

    if best is None:  # zero eval points can only happen with a zero budget
        raise DataError("training produced no evaluation points")
    if curve_path is not None:
        with open(curve_path, "w", encoding="utf-8") as f:
            f.write("epoch,train_loss,val_ppl\n")
            for label, tl, vp in curve_rows:
                f.write(f"{label},{tl:.6f},{vp:.6f}\n")
    return best


def line_logprobs(ids: Sequence[int], checkpoint: LmCheckpoint) -> np.ndarray:
    """log P(y_i | SOS, y_1..i-1) for each character of one encoded line.

    The whole line is run statefully (no chunk cap) in eval mode.
    """
    if not ids:
        return np.zeros(0)
    cfg = checkpoint.config
    inputs = np.array([[checkpoint.vocab.space_id] + list(ids[:-1])])
    logits, _ = forward(inputs, checkpoint.params, cfg, mode="eval")
    out = np.empty(len(ids))
    for t, lt in enumerate(logits):
        out[t] = ad.log_softmax_rows(lt.data)[0, ids[t]]
    return out


def perplexity(lines: Sequence[str], checkpoint: LmCheckpoint) -> float:
    """exp of the mean per-character negative log-likelihood, SOS excluded
    from the character count."""
    total = 0.0
    n = 0
    for line in lines:
        if not line:
            continue
        ids = encode(line, checkpoint.vocab)
        total += float(line_logprobs(ids, checkpoint).sum())
        n += len(ids)
    if n == 0:
        raise DataError("perplexity: no scoreable characters")
    return float(np.exp(-total / n))


def save_checkpoint(ckpt: LmCheckpoint, path) -> None:
    """Container: magic 'CLMR', version 0x01, u32-LE JSON metadata length,
    UTF-8 metadata, then raw little-endian float64 arrays in param_order."""
    meta = {
        "config": asdict(ckpt.config),
        "vocab": list(ckpt.vocab.chars),
        "best_val_perplexity": ckpt.best_val_perplexity,
        "epoch_of_best": ckpt.epoch_of_best,
    }
    blob = json.dumps(meta, ensure_ascii=False).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(bytes([CHECKPOINT_VERSION]))
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    for name in param_order(ckpt.config.num_layers):
        arr = np.ascontiguousarray(ckpt.params[name], dtype="<f8")
        buf.write(arr.tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_checkpoint(path) -> LmCheckpoint:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 9:
        raise TruncatedCheckpointError("checkpoint shorter than header")
    if raw[:4] != CHECKPOINT_MAGIC:
        raise BadMagicError(f"bad magic {raw[:4]!r}")
    if raw[4] != CHECKPOINT_VERSION:
        raise UnsupportedVersionError(f"unsupported version {raw[4]}")
    (meta_len,) = struct.unpack("<I", raw[5:9])
    if len(raw) < 9 + meta_len:
        raise TruncatedCheckpointError("metadata block truncated")
    try:
        meta = json.loads(raw[9 : 9 + meta_len].decode("utf-8"))
        config = LmConfig(**meta["config"])
        vocab = Vocabulary.from_chars(meta["vocab"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ShapeMismatchError(f"bad checkpoint metadata: {exc}") from exc
    if len(vocab) != config.vocab_size:
        raise ShapeMismatchError(
            f"vocabulary size {len(vocab)} != config vocab_size {config.vocab_size}"
        )
    offset = 9 + meta_len
    params: dict[str, np.ndarray] = {}
    shapes = param_shapes(config)
    for name in param_order(config.num_layers):
        shape = shapes[name]
        nbytes = int(np.prod(shape)) * 8
        if len(raw) < offset + nbytes:
            raise TruncatedCheckpointError(f"parameter block {name} truncated")
        params[name] = np.frombuffer(raw, dtype="<f8", count=int(np.prod(shape)), offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(raw):
        raise ShapeMismatchError(f"{len(raw) - offset} unexpected trailing bytes")
    return LmCheckpoint(
        config=config,
        params=params,
        vocab=vocab,
        best_val_perplexity=float(meta["best_val_perplexity"]),
        epoch_of_best=int(meta["epoch_of_best"]),
    )

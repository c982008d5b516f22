"""String log-probability under a trained checkpoint.

A single whitespace character is prepended as the start-of-sequence symbol;
it conditions the first character but contributes no term of its own.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import encode
from .errors import OovError, DataError
from .lm import LmCheckpoint, line_logprobs


@dataclass(frozen=True)
class ScoredString:
    text: str
    lm_logprob: float  # nats
    n_chars: int


def string_logprob(text: str, checkpoint: LmCheckpoint) -> ScoredString:
    """Sum of log P(y_i | ' ', y_1..i-1) over the characters of text.

    The empty string scores 0 (log of an empty product). Raises OovError
    for characters outside the checkpoint vocabulary.
    """
    if not text:
        return ScoredString(text="", lm_logprob=0.0, n_chars=0)
    ids = encode(text, checkpoint.vocab)
    return ScoredString(
        text=text,
        lm_logprob=float(line_logprobs(ids, checkpoint).sum()),
        n_chars=len(ids),
    )


def batch_logprob(texts: Sequence[str], checkpoint: LmCheckpoint) -> list[ScoredString]:
    """Element-wise string_logprob, order preserved; the first OOV aborts."""
    out = []
    for i, text in enumerate(texts):
        try:
            out.append(string_logprob(text, checkpoint))
        except OovError as exc:
            raise DataError(f"text {i}: {exc}") from exc
    return out

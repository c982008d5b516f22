"""Text normalization, character vocabulary, corpus encoding and sampling.

Normalization keeps the ʻokina (U+02BB) and macron vowels intact while
stripping case, punctuation, and irregular whitespace, so the character
inventory the LM sees matches what WER evaluation compares.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, OovError

OKINA = "ʻ"

# Characters commonly used in source texts to write the glottal stop.
_GLOTTAL_MARKS = {"`", "’"}  # grave accent, right single quote


def normalize_text(raw: str) -> str:
    """Normalize one line: NFC, lowercase, canonical ʻokina, strip punctuation
    and symbols, collapse whitespace.

    Idempotent: normalize_text(normalize_text(s)) == normalize_text(s).
    """
    s = unicodedata.normalize("NFC", raw)
    s = s.lower()
    out = []
    for ch in s:
        if ch in _GLOTTAL_MARKS:
            out.append(OKINA)
            continue
        cat = unicodedata.category(ch)
        if cat[0] in ("P", "S"):
            continue
        if cat[0] == "C":  # control/format chars never belong in a transcript
            continue
        out.append(ch)
    s = " ".join("".join(out).split())
    return unicodedata.normalize("NFC", s)


@dataclass(frozen=True)
class Vocabulary:
    """Ordered character inventory; id 0 is always the whitespace SOS stand-in."""

    chars: tuple[str, ...]
    index: dict[str, int]

    def __len__(self) -> int:
        return len(self.chars)

    def __contains__(self, ch: str) -> bool:
        return ch in self.index

    @property
    def space_id(self) -> int:
        return self.index[" "]

    @classmethod
    def from_chars(cls, chars: Sequence[str]) -> "Vocabulary":
        chars = tuple(chars)
        if " " not in chars:
            raise DataError("vocabulary must contain the whitespace character")
        if len(set(chars)) != len(chars):
            raise DataError("vocabulary contains duplicate characters")
        return cls(chars=chars, index={c: i for i, c in enumerate(chars)})


def build_vocab(lines: Iterable[str]) -> Vocabulary:
    """Vocabulary = {' '} plus every codepoint in the corpus, ' ' first then
    ascending codepoint order."""
    seen: set[str] = set()
    for line in lines:
        seen.update(line)
    if not seen:
        raise DataError("empty corpus")
    seen.discard(" ")
    chars = (" ",) + tuple(sorted(seen))
    return Vocabulary.from_chars(chars)


def encode(text: str, vocab: Vocabulary) -> list[int]:
    ids = []
    for offset, ch in enumerate(text):
        try:
            ids.append(vocab.index[ch])
        except KeyError:
            raise OovError(ch, offset) from None
    return ids


def decode(ids: Sequence[int], vocab: Vocabulary) -> str:
    try:
        return "".join(vocab.chars[i] for i in ids)
    except IndexError:
        raise DataError(f"id out of range for vocabulary of size {len(vocab)}") from None


def chunk_line(line: str, max_len: int = 100) -> list[str]:
    """Greedy split of one line into chunks of at most max_len characters."""
    return [line[i : i + max_len] for i in range(0, len(line), max_len)]


def chunk_corpus(lines: Iterable[str], max_len: int = 100) -> list[str]:
    """All chunks of all lines, in order; chunks never span line boundaries."""
    chunks: list[str] = []
    for line in lines:
        chunks.extend(chunk_line(line, max_len))
    return chunks


def subsample(lines: Sequence[str], fraction: float, seed: int) -> list[str]:
    """Uniform sample of floor(n * fraction) lines without replacement.

    Fully determined by seed; original line order preserved.
    """
    if not (0.0 < fraction <= 1.0):
        raise DataError(f"fraction must be in (0, 1], got {fraction}")
    n = len(lines)
    k = int(np.floor(n * fraction))
    if fraction == 1.0:
        return list(lines)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=k, replace=False))
    return [lines[i] for i in idx]


@dataclass(frozen=True)
class CorpusStats:
    lines: int
    words: int
    chars: int


def corpus_stats(lines: Iterable[str]) -> CorpusStats:
    """Line / whitespace-delimited-word / codepoint counts (line terminators
    excluded from chars)."""
    n_lines = n_words = n_chars = 0
    for line in lines:
        n_lines += 1
        n_words += len(line.split())
        n_chars += len(line)
    return CorpusStats(lines=n_lines, words=n_words, chars=n_chars)


def read_lines(path) -> list[str]:
    """Read a UTF-8 corpus file, one sentence per line, LF terminators."""
    with open(path, "r", encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f]


def write_lines(path, lines: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")


def save_vocab(vocab: Vocabulary, path) -> None:
    """One codepoint per line in id order (line 0 = id 0)."""
    with open(path, "w", encoding="utf-8") as f:
        for ch in vocab.chars:
            f.write(ch + "\n")


def load_vocab(path) -> Vocabulary:
    with open(path, "r", encoding="utf-8") as f:
        chars = [line.rstrip("\n") for line in f]
    for c in chars:
        if len(c) != 1:
            raise DataError(f"vocabulary line is not a single codepoint: {c!r}")
    return Vocabulary.from_chars(chars)

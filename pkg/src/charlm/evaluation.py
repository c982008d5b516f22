"""Word error rate, character-level edit diagnostics, and test-set filtering.

Alignment convention throughout: a deletion is an item present in the
reference but missing from the hypothesis; an insertion is an extra item
in the hypothesis. Backtrace ties resolve match > substitution >
deletion > insertion so scripts are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import normalize_text
from .errors import DataError


@dataclass(frozen=True)
class WerReport:
    substitutions: int
    deletions: int
    insertions: int
    ref_words: int
    wer: float

    def to_dict(self) -> dict:
        return {
            "s": self.substitutions,
            "d": self.deletions,
            "i": self.insertions,
            "ref_words": self.ref_words,
            "wer": self.wer,
        }


@dataclass(frozen=True)
class EditSpan:
    kind: str  # match | substitution | deletion | insertion
    ref: str  # reference-side text ("" for insertions)
    hyp: str  # hypothesis-side text ("" for deletions)


def word_tokenize(text: str) -> list[str]:
    """Split normalized text on whitespace; empty text gives no tokens."""
    return text.split()


def align(ref: Sequence, hyp: Sequence) -> list[str]:
    """Minimal-edit alignment operations over two item sequences.

    Returns a list of 'match'/'substitution'/'deletion'/'insertion' tags,
    one per alignment column, Levenshtein-optimal with the fixed
    tie-break preference.
    """
    n, m = len(ref), len(hyp)
    # cost[i][j]: distance between ref[:i] and hyp[:j]
    cost = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = i
    for j in range(1, m + 1):
        cost[0][j] = j
    for i in range(1, n + 1):
        row, prev = cost[i], cost[i - 1]
        ri = ref[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (0 if ri == hyp[j - 1] else 1)
            row[j] = min(sub, prev[j] + 1, row[j - 1] + 1)
    ops: list[str] = []
    i, j = n, m
    while i > 0 or j > 0:
        here = cost[i][j]
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and here == cost[i - 1][j - 1]:
            ops.append("match")
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and here == cost[i - 1][j - 1] + 1:
            ops.append("substitution")
            i, j = i - 1, j - 1
        elif i > 0 and here == cost[i - 1][j] + 1:
            ops.append("deletion")
            i -= 1
        else:
            ops.append("insertion")
            j -= 1
    ops.reverse()
    return ops


def wer(reference: str, hypothesis: str) -> WerReport:
    """Word-level WER = (S + D + I) / reference word count."""
    ref_words = word_tokenize(reference)
    hyp_words = word_tokenize(hypothesis)
    if not ref_words:
        if hyp_words:
            raise DataError("undefined WER (zero reference words)")
        return WerReport(0, 0, 0, 0, 0.0)
    ops = align(ref_words, hyp_words)
    s = ops.count("substitution")
    d = ops.count("deletion")
    i = ops.count("insertion")
    return WerReport(s, d, i, len(ref_words), (s + d + i) / len(ref_words))


def corpus_wer(
    pairs: Sequence[tuple[str, str]], ids: Sequence[str] | None = None
) -> WerReport:
    """Pooled corpus WER: sum of edit counts over sum of reference words."""
    bad = []
    for k, (ref, _) in enumerate(pairs):
        if not word_tokenize(ref):
            bad.append(ids[k] if ids is not None else str(k))
    if bad:
        raise DataError(f"empty references for: {', '.join(bad)}")
    s = d = i = n = 0
    for ref, hyp in pairs:
        r = wer(ref, hyp)
        s += r.substitutions
        d += r.deletions
        i += r.insertions
        n += r.ref_words
    return WerReport(s, d, i, n, (s + d + i) / n if n else 0.0)


def char_alignment(reference: str, hypothesis: str) -> list[EditSpan]:
    """Levenshtein-optimal character alignment as merged tagged spans."""
    ops = align(reference, hypothesis)
    spans: list[EditSpan] = []
    i = j = 0
    for op in ops:
        if op == "match" or op == "substitution":
            r, h = reference[i], hypothesis[j]
            i, j = i + 1, j + 1
        elif op == "deletion":
            r, h = reference[i], ""
            i += 1
        else:
            r, h = "", hypothesis[j]
            j += 1
        if spans and spans[-1].kind == op:
            spans[-1] = EditSpan(op, spans[-1].ref + r, spans[-1].hyp + h)
        else:
            spans.append(EditSpan(op, r, h))
    return spans


def edit_cost(spans: Iterable[EditSpan]) -> int:
    total = 0
    for sp in spans:
        if sp.kind == "substitution":
            total += len(sp.ref)
        elif sp.kind == "deletion":
            total += len(sp.ref)
        elif sp.kind == "insertion":
            total += len(sp.hyp)
    return total


def render_script_text(spans: Iterable[EditSpan]) -> str:
    """Plain-text rendering with [DEL:...], [SUB:a->b], [INS:...] tags."""
    out = []
    for sp in spans:
        if sp.kind == "match":
            out.append(sp.ref)
        elif sp.kind == "deletion":
            out.append(f"[DEL:{sp.ref}]")
        elif sp.kind == "insertion":
            out.append(f"[INS:{sp.hyp}]")
        else:
            out.append(f"[SUB:{sp.ref}→{sp.hyp}]")
    return "".join(out)


_HTML_STYLE = (
    "<style>.del{background:#ff8a80}.sub{background:#ffee58}"
    ".ins{background:#a5d6a7}</style>"
)


def render_script_html(spans: Iterable[EditSpan]) -> str:
    """HTML rendering: deletions red, substitutions yellow, insertions green."""
    import html

    parts = [_HTML_STYLE]
    for sp in spans:
        if sp.kind == "match":
            parts.append(html.escape(sp.ref))
        elif sp.kind == "deletion":
            parts.append(f'<span class="del">{html.escape(sp.ref)}</span>')
        elif sp.kind == "insertion":
            parts.append(f'<span class="ins">{html.escape(sp.hyp)}</span>')
        else:
            parts.append(
                f'<span class="sub">{html.escape(sp.ref)}→{html.escape(sp.hyp)}</span>'
            )
    return "".join(parts)


@dataclass(frozen=True)
class TestPair:
    utterance_id: str
    reference: str
    audio_duration: float  # seconds; metadata only


@dataclass(frozen=True)
class FilterResult:
    kept: list[tuple[TestPair, tuple[str, ...]]]  # pair + flags
    discarded: list[tuple[TestPair, str]]  # pair + reason


MAX_AUDIO_SECONDS = 30.0


def filter_testset(pairs: Sequence[TestPair]) -> FilterResult:
    """Discard pairs whose normalized reference is empty; flag long audio.

    The audio-text discrepancy check needs a human; every kept pair goes to
    the review manifest the caller emits.
    """
    kept: list[tuple[TestPair, tuple[str, ...]]] = []
    discarded: list[tuple[TestPair, str]] = []
    for pair in pairs:
        if not normalize_text(pair.reference):
            discarded.append((pair, "empty-after-normalization"))
            continue
        flags = ("exceeds-30s",) if pair.audio_duration > MAX_AUDIO_SECONDS else ()
        kept.append((pair, flags))
    return FilterResult(kept=kept, discarded=discarded)

"""N-best rescoring with the weighted log-probability blend.

Each hypothesis is scored as alpha * logP_LM + (1 - alpha) * logP_ASR and
the argmax is selected with a deterministic tie-break. alpha = 0 is the
ASR-only baseline; alpha = 1 is excluded. Hypotheses with characters the
LM cannot score keep lm_logprob = -inf and are flagged, so they can still
win at alpha = 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .corpus import normalize_text
from .errors import DataError, OovError
from .lm import LmCheckpoint
from .scoring import string_logprob


@dataclass(frozen=True)
class Hypothesis:
    text: str  # raw, as produced by the ASR
    asr_logprob: float

    def __post_init__(self):
        if not math.isfinite(self.asr_logprob):
            raise DataError(f"non-finite asr_logprob for hypothesis {self.text!r}")


@dataclass(frozen=True)
class HypothesisSet:
    utterance_id: str
    hypotheses: tuple[Hypothesis, ...]
    reference: str | None = None

    def __post_init__(self):
        if not self.hypotheses:
            raise DataError(f"utterance {self.utterance_id}: empty hypothesis list")


@dataclass(frozen=True)
class RescoredHypothesis:
    text: str
    asr_logprob: float
    lm_logprob: float  # -inf when the hypothesis is unscorable
    score: float
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class RescoredSet:
    utterance_id: str
    hypotheses: tuple[RescoredHypothesis, ...]
    selected: int
    flags: tuple[str, ...] = ()
    reference: str | None = None

    @property
    def selection(self) -> RescoredHypothesis:
        return self.hypotheses[self.selected]


def check_alpha(alpha: float) -> float:
    if not (0.0 <= alpha < 1.0):
        raise DataError(f"alpha must be in [0, 1), got {alpha}")
    return float(alpha)


def blend_score(lm_logprob: float, asr_logprob: float, alpha: float) -> float:
    """alpha * lm + (1 - alpha) * asr; at alpha = 0 the LM term vanishes even
    when lm_logprob is -inf."""
    check_alpha(alpha)
    if alpha == 0.0:
        return asr_logprob
    return alpha * lm_logprob + (1.0 - alpha) * asr_logprob


def _selection_key(h: RescoredHypothesis):
    # argmax on score; ties: higher asr_logprob, then shorter, then lexicographic
    return (-h.score, -h.asr_logprob, len(h.text), h.text)


def select(hyps: Sequence[RescoredHypothesis]) -> int:
    """Index of the winning hypothesis under the deterministic tie-break."""
    return min(range(len(hyps)), key=lambda i: _selection_key(hyps[i]))


def reblend(hyps: Sequence[RescoredHypothesis], alpha: float) -> tuple[RescoredHypothesis, ...]:
    """Recompute blended scores at a new alpha from already-scored hypotheses."""
    return tuple(
        replace(h, score=blend_score(h.lm_logprob, h.asr_logprob, alpha)) for h in hyps
    )


def rescore_set(hset: HypothesisSet, checkpoint: LmCheckpoint, alpha: float) -> RescoredSet:
    check_alpha(alpha)
    scored: list[RescoredHypothesis] = []
    for hyp in hset.hypotheses:
        normalized = normalize_text(hyp.text)
        flags: list[str] = []
        try:
            lm_lp = string_logprob(normalized, checkpoint).lm_logprob
        except OovError:
            lm_lp = float("-inf")
            flags.append("oov")
        scored.append(
            RescoredHypothesis(
                text=hyp.text,
                asr_logprob=hyp.asr_logprob,
                lm_logprob=lm_lp,
                score=blend_score(lm_lp, hyp.asr_logprob, alpha),
                flags=tuple(flags),
            )
        )
    selected = select(scored)
    set_flags: list[str] = []
    if not normalize_text(hset.hypotheses[selected].text):
        set_flags.append("empty-winner")
    return RescoredSet(
        utterance_id=hset.utterance_id,
        hypotheses=tuple(scored),
        selected=selected,
        flags=tuple(set_flags),
        reference=hset.reference,
    )


def crossover_alpha(h1: RescoredHypothesis, h2: RescoredHypothesis) -> tuple[float | None, str]:
    """The alpha in [0, 1) where the two blended scores are equal.

    Returns (alpha, '') when a crossover exists, (None, 'always-tied') for
    identical score lines, and (None, 'no-crossover') otherwise.
    """
    d_asr = h1.asr_logprob - h2.asr_logprob
    d_lm = h2.lm_logprob - h1.lm_logprob
    if d_asr == 0.0 and d_lm == 0.0:
        return None, "always-tied"
    denom = d_asr + d_lm
    if denom == 0.0:
        return None, "no-crossover"
    alpha = d_asr / denom
    if 0.0 <= alpha < 1.0:
        return alpha, ""
    return None, "no-crossover"


def alpha_sweep(
    sets: Sequence[HypothesisSet],
    checkpoint: LmCheckpoint,
    alphas: Sequence[float] = (0.0, 0.25, 0.5, 0.75),
) -> list[dict]:
    """Rescore every set at each alpha and compute the pooled corpus WER of
    the selections. alpha = 0 is the no-LM baseline row."""
    from .evaluation import corpus_wer

    missing = [s.utterance_id for s in sets if s.reference is None]
    if missing:
        raise DataError(f"missing references for utterances: {', '.join(missing)}")
    rows = []
    for alpha in alphas:
        check_alpha(alpha)
        pairs = []
        for hset in sets:
            rescored = rescore_set(hset, checkpoint, alpha)
            pairs.append(
                (
                    normalize_text(hset.reference),
                    normalize_text(rescored.selection.text),
                    hset.utterance_id,
                )
            )
        report = corpus_wer([(r, h) for r, h, _ in pairs], ids=[u for _, _, u in pairs])
        rows.append(
            {
                "alpha": alpha,
                "wer": report.wer,
                "substitutions": report.substitutions,
                "deletions": report.deletions,
                "insertions": report.insertions,
                "ref_words": report.ref_words,
            }
        )
    return rows


def write_sweep_csv(rows: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("alpha,wer,substitutions,deletions,insertions,ref_words\n")
        for r in rows:
            f.write(
                f"{r['alpha']},{r['wer']:.6f},{r['substitutions']},"
                f"{r['deletions']},{r['insertions']},{r['ref_words']}\n"
            )


def read_nbest(path) -> list[HypothesisSet]:
    """Parse a JSON Lines N-best file; errors carry 1-based line numbers."""
    sets: list[HypothesisSet] = []
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            try:
                uid = str(obj["id"])
                hyps = tuple(
                    Hypothesis(text=str(h["text"]), asr_logprob=float(h["asr_logprob"]))
                    for h in obj["hypotheses"]
                )
                ref = obj.get("reference")
                hset = HypothesisSet(
                    utterance_id=uid,
                    hypotheses=hyps,
                    reference=None if ref is None else str(ref),
                )
            except (KeyError, TypeError, ValueError, DataError) as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            if uid in seen_ids:
                raise DataError(f"{path}: line {lineno}: duplicate utterance id {uid!r}")
            seen_ids.add(uid)
            sets.append(hset)
    return sets


def write_rescored(sets: Iterable[RescoredSet], path) -> None:
    """JSON Lines mirroring the input plus lm_logprob/score/selected/flags."""
    with open(path, "w", encoding="utf-8") as f:
        for s in sets:
            obj = {
                "id": s.utterance_id,
                "hypotheses": [
                    {
                        "text": h.text,
                        "asr_logprob": h.asr_logprob,
                        # -inf is not valid JSON; unscorable hypotheses carry null
                        "lm_logprob": h.lm_logprob if math.isfinite(h.lm_logprob) else None,
                        "score": h.score if math.isfinite(h.score) else None,
                        "flags": list(h.flags),
                    }
                    for h in s.hypotheses
                ],
                "selected": s.selected,
                "flags": list(s.flags),
            }
            if s.reference is not None:
                obj["reference"] = s.reference
            f.write(json.dumps(obj, ensure_ascii=False) + "\n")

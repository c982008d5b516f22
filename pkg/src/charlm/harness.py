"""Experiment orchestration: data-fraction ablations, correlation reports,
and replicate WER comparisons.

Each ablation cell (fraction, repeat) subsamples the training lines with
seed = base_seed + repeat, rebuilds the vocabulary, trains a fresh LM with
the shared config, and rescores the N-best file at the configured alpha.
Cells fail independently; completed rows land in the CSV as they finish so
a sweep is resumable by inspection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .corpus import corpus_stats, subsample
from .errors import DataError
from .lm import LmConfig, train
from .rescore import HypothesisSet, alpha_sweep
from .stats import TestResult, bonferroni, one_sample_t, pearson, welch_t


@dataclass(frozen=True)
class AblationRecord:
    fraction: float
    repeat: int
    seed: int
    train_words: int
    val_perplexity: float
    wer: float
    status: str  # "ok" or "failed: <reason>"


ABLATION_HEADER = "fraction,repeat,seed,train_words,val_perplexity,wer,status\n"


def _record_csv(rec: AblationRecord) -> str:
    vp = "" if math.isnan(rec.val_perplexity) else f"{rec.val_perplexity:.6f}"
    w = "" if math.isnan(rec.wer) else f"{rec.wer:.6f}"
    return f"{rec.fraction},{rec.repeat},{rec.seed},{rec.train_words},{vp},{w},{rec.status}\n"


def run_ablation(
    train_lines: Sequence[str],
    valid_lines: Sequence[str],
    nbest_sets: Sequence[HypothesisSet],
    config: LmConfig,
    fractions: Sequence[float] = (1.0, 0.5, 0.25, 0.125, 0.0625),
    repeats: int = 5,
    base_seed: int = 0,
    alpha: float = 0.25,
    out_csv=None,
    log=None,
) -> list[AblationRecord]:
    missing = [s.utterance_id for s in nbest_sets if s.reference is None]
    if missing:
        raise DataError(f"missing references for utterances: {', '.join(missing)}")
    records: list[AblationRecord] = []
    out = open(out_csv, "w", encoding="utf-8") if out_csv is not None else None
    if out:
        out.write(ABLATION_HEADER)
        out.flush()
    try:
        for fraction in sorted(fractions):
            for repeat in range(repeats):
                seed = base_seed + repeat
                subset = subsample(train_lines, fraction, seed)
                words = corpus_stats(subset).words
                cell_config = replace(config, seed=seed)
                try:
                    ckpt = train(subset, valid_lines, cell_config)
                    row = alpha_sweep(nbest_sets, ckpt, alphas=[alpha])[0]
                    rec = AblationRecord(
                        fraction, repeat, seed, words,
                        ckpt.best_val_perplexity, row["wer"], "ok",
                    )
                except Exception as exc:  # isolate per-cell failures
                    rec = AblationRecord(
                        fraction, repeat, seed, words,
                        float("nan"), float("nan"), f"failed: {exc}",
                    )
                records.append(rec)
                if log:
                    log(
                        f"fraction {fraction} repeat {repeat}: "
                        f"ppl {rec.val_perplexity:.4f} wer {rec.wer:.4f} ({rec.status})"
                    )
                if out:
                    out.write(_record_csv(rec))
                    out.flush()
    finally:
        if out:
            out.close()
    return records


def read_ablation_csv(path) -> list[AblationRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline()
        if header.strip() != ABLATION_HEADER.strip():
            raise DataError(f"{path}: unexpected ablation CSV header")
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(",", 6)
            if len(parts) != 7:
                raise DataError(f"{path}: line {lineno}: expected 7 fields")
            fraction, repeat, seed, words, vp, w, status = parts
            records.append(
                AblationRecord(
                    float(fraction), int(repeat), int(seed), int(words),
                    float(vp) if vp else float("nan"),
                    float(w) if w else float("nan"),
                    status,
                )
            )
    return records


def correlate_ablation(records: Sequence[AblationRecord]) -> dict:
    """Pearson tests for (words, perplexity), (words, WER), (perplexity, WER)
    over successful cells, Bonferroni corrected for 3 comparisons."""
    ok = [r for r in records if r.status == "ok"]
    if len(ok) < 3:
        raise DataError("correlate_ablation needs at least 3 successful records")
    words = [float(r.train_words) for r in ok]
    ppl = [r.val_perplexity for r in ok]
    wer = [r.wer for r in ok]
    tests = {
        "words_vs_perplexity": pearson(words, ppl),
        "words_vs_wer": pearson(words, wer),
        "perplexity_vs_wer": pearson(ppl, wer),
    }
    corrected = bonferroni([t.p_value for t in tests.values()], 3)
    return {
        "tests": tests,
        "corrected_p": dict(zip(tests.keys(), corrected)),
        "points": {
            "words_vs_perplexity": list(zip(words, ppl)),
            "words_vs_wer": list(zip(words, wer)),
            "perplexity_vs_wer": list(zip(ppl, wer)),
        },
    }


def write_correlation_csvs(report: dict, prefix: str) -> list[str]:
    """One scatter CSV per correlation panel; returns the written paths."""
    names = {
        "words_vs_perplexity": ("train_words", "val_perplexity"),
        "words_vs_wer": ("train_words", "wer"),
        "perplexity_vs_wer": ("val_perplexity", "wer"),
    }
    paths = []
    for key, (xname, yname) in names.items():
        path = f"{prefix}{key}.csv"
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"{xname},{yname}\n")
            for x, y in report["points"][key]:
                f.write(f"{x},{y}\n")
        paths.append(path)
    return paths


def sem(values: Sequence[float]) -> float:
    """Standard error of the mean (n-1 variance)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        raise DataError("sem needs at least 2 values")
    return float(arr.std(ddof=1) / np.sqrt(arr.size))


def compare_replicates(
    groups: dict[str, Sequence[float]],
    baseline: float | None = None,
) -> tuple[TestResult, list[dict]]:
    """Welch's t between two replicate groups, or a one-sample t of a single
    group against a deterministic baseline WER. Also returns the
    mean +/- SEM table used for bar plots."""
    table = [
        {"group": name, "mean_wer": float(np.mean(vals)), "sem": sem(vals), "n": len(vals)}
        for name, vals in groups.items()
    ]
    if baseline is not None:
        if len(groups) != 1:
            raise DataError("one-sample comparison takes exactly one group")
        (vals,) = groups.values()
        return one_sample_t(list(vals), baseline), table
    if len(groups) != 2:
        raise DataError("two-sample comparison takes exactly two groups")
    a, b = groups.values()
    return welch_t(list(a), list(b)), table


def write_replicate_table(table: Sequence[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("group,mean_wer,sem,n\n")
        for row in table:
            f.write(f"{row['group']},{row['mean_wer']:.6f},{row['sem']:.6f},{row['n']}\n")

"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
failure. All randomness comes from explicit seeds (flags or config);
nothing reads system entropy.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import corpus, evaluation, harness, lm, rescore, scoring, stats, svgplot
from .errors import CharlmError, DataError, NumericError, UsageError

CONFIG_KEYS = {
    "train": str,
    "valid": str,
    "nbest": str,
    "checkpoint": str,
    "output_dir": str,
    "alpha": float,
    "alphas": list,
    "hidden_size": int,
    "num_layers": int,
    "dropout_p": float,
    "learning_rate": float,
    "batch_size": int,
    "clip": float,
    "clip_mode": str,
    "max_seq_len": int,
    "max_epochs": int,
    "epochs_are_steps": bool,
    "eval_every": int,
    "seed": int,
}

LM_CONFIG_KEYS = (
    "hidden_size", "num_layers", "dropout_p", "learning_rate", "batch_size",
    "clip", "clip_mode", "max_seq_len", "max_epochs", "epochs_are_steps",
    "eval_every", "seed",
)


def load_run_config(path) -> dict:
    """Strict-schema JSON run configuration; unknown keys are rejected."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            cfg = json.load(f)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise DataError(f"{path}: config must be a JSON object")
    unknown = sorted(set(cfg) - set(CONFIG_KEYS))
    if unknown:
        raise DataError(f"{path}: unknown config keys: {', '.join(unknown)}")
    for key, value in cfg.items():
        want = CONFIG_KEYS[key]
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            continue
        if not isinstance(value, want) or (want is int and isinstance(value, bool)):
            raise DataError(f"{path}: config key {key!r} must be {want.__name__}")
    return cfg


def make_lm_config(cfg: dict, overrides: dict) -> lm.LmConfig:
    kwargs = {k: cfg[k] for k in LM_CONFIG_KEYS if k in cfg}
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    config = lm.LmConfig(**kwargs)
    config.validate()
    return config


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"bad {what} list {text!r}") from exc


def _add_lm_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hidden-size", type=int, dest="hidden_size")
    p.add_argument("--num-layers", type=int, dest="num_layers")
    p.add_argument("--dropout-p", type=float, dest="dropout_p")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--clip", type=float)
    p.add_argument("--clip-mode", choices=("norm", "value"), dest="clip_mode")
    p.add_argument("--max-seq-len", type=int, dest="max_seq_len")
    p.add_argument("--max-epochs", type=int, dest="max_epochs",
                   help="training budget (steps by default, passes with --full-epochs)")
    p.add_argument("--full-epochs", action="store_true", default=None,
                   help="interpret the epoch budget as full corpus passes")
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--seed", type=int)


def _lm_overrides(args) -> dict:
    over = {k: getattr(args, k, None) for k in LM_CONFIG_KEYS if k != "epochs_are_steps"}
    if getattr(args, "full_epochs", None):
        over["epochs_are_steps"] = False
    return over


def cmd_normalize(args) -> int:
    for line in sys.stdin:
        sys.stdout.write(corpus.normalize_text(line) + "\n")
    return 0


def cmd_vocab(args) -> int:
    lines = corpus.read_lines(args.corpus)
    vocab = corpus.build_vocab(lines)
    corpus.save_vocab(vocab, args.out)
    print(f"wrote {len(vocab)} characters to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_run_config(args.config) if args.config else {}
    config = make_lm_config(cfg, _lm_overrides(args))
    train_path = args.corpus or cfg.get("train")
    valid_path = args.valid or cfg.get("valid")
    if not train_path or not valid_path:
        raise UsageError("train requires --corpus and --valid (or config paths)")
    train_lines = corpus.read_lines(train_path)
    valid_lines = corpus.read_lines(valid_path)
    ckpt = lm.train(
        train_lines, valid_lines, config,
        curve_path=args.curve,
        log=(lambda msg: print(msg, file=sys.stderr)) if args.verbose else None,
    )
    lm.save_checkpoint(ckpt, args.out)
    print(
        f"best val ppl {ckpt.best_val_perplexity:.6f} at epoch "
        f"{ckpt.epoch_of_best}; wrote {args.out}"
    )
    return 0


def cmd_ppl(args) -> int:
    ckpt = lm.load_checkpoint(args.model)
    lines = [line for line in corpus.read_lines(args.text)]
    print(f"{lm.perplexity(lines, ckpt):.6f}")
    return 0


def cmd_score(args) -> int:
    ckpt = lm.load_checkpoint(args.model)
    lines = corpus.read_lines(args.text)
    for scored in scoring.batch_logprob(lines, ckpt):
        print(f"{scored.text}\t{scored.lm_logprob:.6f}\t{scored.n_chars}")
    return 0


def cmd_rescore(args) -> int:
    ckpt = lm.load_checkpoint(args.model)
    sets = rescore.read_nbest(args.nbest)
    rescored = [rescore.rescore_set(s, ckpt, args.alpha) for s in sets]
    rescore.write_rescored(rescored, args.out)
    warned = sum(1 for r in rescored if "empty-winner" in r.flags)
    if warned:
        print(f"warning: empty hypothesis selected for {warned} utterance(s)", file=sys.stderr)
    print(f"rescored {len(rescored)} utterances at alpha={args.alpha} -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    ckpt = lm.load_checkpoint(args.model)
    sets = rescore.read_nbest(args.nbest)
    alphas = _parse_floats(args.alphas, "alpha")
    rows = rescore.alpha_sweep(sets, ckpt, alphas)
    rescore.write_sweep_csv(rows, args.out)
    for row in rows:
        print(f"alpha {row['alpha']}: wer {row['wer']:.6f}")
    return 0


def cmd_wer(args) -> int:
    refs = corpus.read_lines(args.ref)
    hyps = corpus.read_lines(args.hyp)
    if len(refs) != len(hyps):
        raise DataError(f"{len(refs)} references but {len(hyps)} hypotheses")
    pairs = [(corpus.normalize_text(r), corpus.normalize_text(h)) for r, h in zip(refs, hyps)]
    report = evaluation.corpus_wer(pairs)
    print(json.dumps(report.to_dict()))
    if args.per_utt:
        with open(args.per_utt, "w", encoding="utf-8") as f:
            f.write("index\ts\td\ti\tref_words\twer\n")
            for k, (r, h) in enumerate(pairs):
                u = evaluation.wer(r, h)
                f.write(
                    f"{k}\t{u.substitutions}\t{u.deletions}\t{u.insertions}"
                    f"\t{u.ref_words}\t{u.wer:.6f}\n"
                )
    if args.char_diff:
        for r, h in pairs:
            spans = evaluation.char_alignment(r, h)
            print(evaluation.render_script_text(spans))
    return 0


def cmd_filter_testset(args) -> int:
    pairs = []
    with open(args.pairs, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pairs.append(
                    evaluation.TestPair(
                        utterance_id=str(obj["id"]),
                        reference=str(obj["reference"]),
                        audio_duration=float(obj.get("audio_duration", 0.0)),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{args.pairs}: line {lineno}: {exc}") from exc
    result = evaluation.filter_testset(pairs)
    with open(args.out, "w", encoding="utf-8") as f:
        for pair, flags in result.kept:
            f.write(json.dumps({
                "id": pair.utterance_id,
                "reference": pair.reference,
                "audio_duration": pair.audio_duration,
                "flags": list(flags),
            }, ensure_ascii=False) + "\n")
    with open(args.review, "w", encoding="utf-8") as f:
        for pair, flags in result.kept:
            f.write(json.dumps({
                "id": pair.utterance_id,
                "reference": pair.reference,
                "audio_duration": pair.audio_duration,
                "flags": list(flags),
                "review": "check audio-text agreement manually",
            }, ensure_ascii=False) + "\n")
    print(
        f"kept {len(result.kept)}, discarded {len(result.discarded)} "
        f"(reasons: {', '.join(sorted({r for _, r in result.discarded})) or 'none'})"
    )
    return 0


def cmd_ablate(args) -> int:
    cfg = load_run_config(args.config)
    for key in ("train", "valid", "nbest"):
        if key not in cfg:
            raise DataError(f"{args.config}: ablate requires the {key!r} path")
    config = make_lm_config(cfg, _lm_overrides(args))
    train_lines = corpus.read_lines(cfg["train"])
    valid_lines = corpus.read_lines(cfg["valid"])
    sets = rescore.read_nbest(cfg["nbest"])
    fractions = _parse_floats(args.fractions, "fraction")
    records = harness.run_ablation(
        train_lines, valid_lines, sets, config,
        fractions=fractions,
        repeats=args.repeats,
        base_seed=cfg.get("seed", 0),
        alpha=args.alpha if args.alpha is not None else cfg.get("alpha", 0.25),
        out_csv=args.out,
        log=(lambda msg: print(msg, file=sys.stderr)) if args.verbose else None,
    )
    failed = sum(1 for r in records if r.status != "ok")
    print(f"wrote {len(records)} records to {args.out} ({failed} failed)")
    return 0


def _stats_values(text: str) -> list[float]:
    return _parse_floats(text, "sample")


def cmd_stats(args) -> int:
    if args.stats_cmd == "welch":
        result = stats.welch_t(_stats_values(args.a), _stats_values(args.b))
    elif args.stats_cmd == "onesample":
        result = stats.one_sample_t(_stats_values(args.sample), args.mu0)
    else:
        result = stats.pearson(_stats_values(args.x), _stats_values(args.y))
    out = result.to_dict()
    if getattr(args, "bonferroni", None):
        out["corrected_p"] = stats.bonferroni([result.p_value], args.bonferroni)[0]
    print(json.dumps(out))
    return 0


def cmd_report(args) -> int:
    if (args.sweep is None) == (args.ablation is None):
        raise UsageError("report takes exactly one of --sweep or --ablation")
    if args.sweep:
        rows = []
        with open(args.sweep, "r", encoding="utf-8") as f:
            header = f.readline().strip().split(",")
            for line in f:
                if line.strip():
                    rows.append(dict(zip(header, line.strip().split(","))))
        labels = [r["alpha"] for r in rows]
        values = [float(r["wer"]) for r in rows]
        svgplot.bars_svg(labels, values, None, "alpha", "WER", args.svg,
                         title="Rescoring sweep")
    else:
        records = harness.read_ablation_csv(args.ablation)
        report = harness.correlate_ablation(records)
        panels = [
            (report["points"]["words_vs_perplexity"], "train words", "val perplexity",
             "words vs perplexity"),
            (report["points"]["words_vs_wer"], "train words", "WER", "words vs WER"),
            (report["points"]["perplexity_vs_wer"], "val perplexity", "WER",
             "perplexity vs WER"),
        ]
        svgplot.multi_panel_svg(panels, args.svg)
        if args.csv_prefix:
            harness.write_correlation_csvs(report, args.csv_prefix)
        summary = {
            key: {"r": t.statistic, "df": t.df, "p": t.p_value,
                  "corrected_p": report["corrected_p"][key]}
            for key, t in report["tests"].items()
        }
        print(json.dumps(summary))
    print(f"wrote {args.svg}")
    return 0


def build_parser() -> Parser:
    parser = Parser(prog="charlm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="normalize text from stdin to stdout")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("vocab", help="build a character vocabulary from a corpus")
    p.add_argument("--corpus", required=True, help="training corpus (UTF-8, one line per sentence)")
    p.add_argument("--out", required=True, help="output vocabulary file")
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("train", help="train a character LSTM LM")
    p.add_argument("--corpus", help="training corpus file")
    p.add_argument("--valid", help="validation corpus file")
    p.add_argument("--config", help="JSON run configuration (flags override it)")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--curve", help="training-curve CSV output path")
    p.add_argument("--verbose", action="store_true", help="log eval points to stderr")
    _add_lm_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ppl", help="compute perplexity of a text file")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--text", required=True, help="text file to score")
    p.set_defaults(func=cmd_ppl)

    p = sub.add_parser("score", help="per-line string log-probabilities (TSV)")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--text", required=True, help="text file, one string per line")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("rescore", help="rescore an N-best JSONL file at one alpha")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--nbest", required=True, help="N-best JSONL input")
    p.add_argument("--alpha", type=float, required=True, help="LM blend weight in [0, 1)")
    p.add_argument("--out", required=True, help="rescored JSONL output")
    p.set_defaults(func=cmd_rescore)

    p = sub.add_parser("sweep", help="alpha sweep with corpus WER per alpha")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--nbest", required=True, help="N-best JSONL input (with references)")
    p.add_argument("--alphas", default="0,0.25,0.5,0.75", help="comma-separated alphas")
    p.add_argument("--out", required=True, help="sweep CSV output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("wer", help="corpus WER of parallel ref/hyp files")
    p.add_argument("--ref", required=True, help="reference text file")
    p.add_argument("--hyp", required=True, help="hypothesis text file")
    p.add_argument("--char-diff", action="store_true", dest="char_diff",
                   help="print character-level edit scripts")
    p.add_argument("--per-utt", dest="per_utt", help="per-utterance TSV output path")
    p.set_defaults(func=cmd_wer)

    p = sub.add_parser("filter-testset", help="apply test-set filtering rules")
    p.add_argument("--pairs", required=True, help="JSONL of {id, reference, audio_duration}")
    p.add_argument("--out", required=True, help="kept pairs JSONL")
    p.add_argument("--review", required=True, help="human-review manifest JSONL")
    p.set_defaults(func=cmd_filter_testset)

    p = sub.add_parser("ablate", help="data-fraction ablation sweep")
    p.add_argument("--config", required=True, help="JSON run configuration with data paths")
    p.add_argument("--fractions", default="1,0.5,0.25,0.125,0.0625",
                   help="comma-separated line fractions")
    p.add_argument("--repeats", type=int, default=5, help="repeats per fraction")
    p.add_argument("--alpha", type=float, help="rescoring alpha (default from config or 0.25)")
    p.add_argument("--out", required=True, help="ablation CSV output")
    p.add_argument("--verbose", action="store_true", help="log cells to stderr")
    _add_lm_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("stats", help="statistical tests (JSON results)")
    ssub = p.add_subparsers(dest="stats_cmd", required=True)
    w = ssub.add_parser("welch", help="Welch's two-sample t-test")
    w.add_argument("--a", required=True, help="comma-separated sample A")
    w.add_argument("--b", required=True, help="comma-separated sample B")
    o = ssub.add_parser("onesample", help="one-sample t-test")
    o.add_argument("--sample", required=True, help="comma-separated sample")
    o.add_argument("--mu0", type=float, required=True, help="null-hypothesis mean")
    r = ssub.add_parser("pearson", help="Pearson correlation")
    r.add_argument("--x", required=True, help="comma-separated x values")
    r.add_argument("--y", required=True, help="comma-separated y values")
    r.add_argument("--bonferroni", type=int, help="comparison count for correction")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="render sweep or ablation figures (SVG)")
    p.add_argument("--sweep", help="sweep CSV input")
    p.add_argument("--ablation", help="ablation CSV input")
    p.add_argument("--svg", required=True, help="SVG output path")
    p.add_argument("--csv-prefix", dest="csv_prefix",
                   help="prefix for correlation scatter CSVs")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except CharlmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

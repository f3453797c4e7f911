"""Command-line interface.

Subcommands: stats, correlate, linearize, delinearize, augment, filter,
evaluate, sweep.  Augment and filter read a declarative key = value config
file; command-line flags override file keys.  Exit codes: 0 ok, 1 runtime
failure, 2 invalid input or configuration.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .codec import delinearize, linearize, parse_sequence_lines, sequence_line
from .config import (
    CONFIG_KEYS,
    ConfigError,
    RunConfig,
    config_from_mapping,
    load_config_file,
)
from .corpus import (
    FORMAT_JSONL,
    FORMATS,
    CorpusError,
    DuplicateSentenceIdError,
    LabelSet,
    Lexicon,
    corpus_stats,
    label_correlation,
    parse_corpus,
    write_corpus,
)
from .filtering import FilterConfig, classify_silver, merge_aug_golden, rank_and_select, sample_report_line
from .gateway import GatewayError, pll_tokens, score_sentence
from .metrics import (
    correlation_report_rows,
    eval_report_rows,
    parse_eval_report,
    render_correlation_text,
    render_eval_text,
    render_stats_text,
    span_prf,
    stats_report_rows,
)
from .pipeline import build_gateway, run_augment, summary_text, write_augment_outputs

log = logging.getLogger(__name__)


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def _load_labels(args) -> LabelSet:
    return LabelSet.parse(args.labels) if args.labels else LabelSet()


def _load_corpus(path, args, max_depth=None):
    lexicon = Lexicon.from_file(args.stopwords) if getattr(args, "stopwords", None) else Lexicon()
    fmt = getattr(args, "format", FORMAT_JSONL)
    return parse_corpus(_read_text(path), fmt, label_set=_load_labels(args),
                        lexicon=lexicon, max_depth=max_depth)


def _write_output(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_report(report_dir, name: str, rows) -> Path:
    report_dir = Path(report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    path = report_dir / name
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(row + "\n")
    return path


def gather_config(args) -> RunConfig:
    """Config file plus flag overrides, flags winning."""
    mapping = load_config_file(args.config) if getattr(args, "config", None) else {}
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            mapping[key] = str(value)
    return config_from_mapping(mapping)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_stats(args) -> int:
    stats = corpus_stats(_load_corpus(args.corpus, args))
    print(render_stats_text([("corpus", stats)]))
    if args.report_dir:
        _write_report(args.report_dir, "stats.jsonl", stats_report_rows([("corpus", stats)]))
        from . import figures
        figures.stats_figure([("corpus", stats)], Path(args.report_dir) / "stats.png")
    return 0


def cmd_correlate(args) -> int:
    corpus = _load_corpus(args.corpus, args)
    matrix = label_correlation(corpus, _load_labels(args))
    print(render_correlation_text(matrix))
    if args.report_dir:
        _write_report(args.report_dir, "correlation.jsonl", correlation_report_rows(matrix))
        from . import figures
        figures.correlation_figure(matrix, Path(args.report_dir) / "correlation.png")
    return 0


def cmd_linearize(args) -> int:
    corpus = _load_corpus(args.corpus, args)
    lines = [sequence_line(linearize(ann)) for ann in corpus]
    _write_output("".join(line + "\n" for line in lines), args.output)
    return 0


def cmd_delinearize(args) -> int:
    sequences = parse_sequence_lines(_read_text(args.input).splitlines())
    labels = _load_labels(args)
    annotations = []
    seen = set()
    for seq in sequences:
        if seq.id in seen:
            raise DuplicateSentenceIdError(f"duplicate sequence id {seq.id!r}")
        seen.add(seq.id)
        annotations.append(delinearize(seq.items, id=seq.id, label_set=labels,
                                       max_depth=args.max_depth))
    _write_output(write_corpus(annotations), args.output)
    return 0


def cmd_augment(args) -> int:
    cfg = gather_config(args)
    if not cfg.out_dir:
        raise ConfigError("augment needs an output directory (out_dir = <path>)")
    result = run_augment(cfg)
    write_augment_outputs(result, cfg.out_dir, cfg, render_figures=not args.no_figures)
    print(summary_text(result))
    return 0


def cmd_filter(args) -> int:
    cfg = gather_config(args)
    if not cfg.out_dir:
        raise ConfigError("filter needs an output directory (out_dir = <path>)")
    if not cfg.corpus_path:
        raise ConfigError("filter needs the source corpus (corpus = <path>)")
    lexicon = Lexicon.from_file(cfg.stopwords_path) if cfg.stopwords_path else Lexicon()
    corpus = parse_corpus(_read_text(cfg.corpus_path), label_set=cfg.labels,
                          lexicon=lexicon, max_depth=None)
    by_id = {ann.id: ann for ann in corpus}
    sequences = parse_sequence_lines(_read_text(args.generated).splitlines())
    gateway = build_gateway(cfg, corpus, capabilities=("score",))
    samples = []
    try:
        for index, seq in enumerate(sequences):
            source_id = seq.id.partition("#")[0]
            source = by_id.get(source_id)
            if source is None:
                raise CorpusError(f"generated sequence {seq.id!r} has no source sentence "
                                  f"{source_id!r} in the corpus")
            sample = classify_silver(seq, source, label_set=cfg.labels,
                                     lexicon=lexicon, max_depth=cfg.max_depth)
            if sample.is_silver:
                tokens = pll_tokens(seq)
                if not tokens:
                    log.warning("sequence %s has no text tokens, dropped", seq.id)
                    continue
                sample = sample.scored(score_sentence(tokens, gateway, slot=index))
            samples.append(sample)
    finally:
        gateway.close()
    kept = rank_and_select(samples, FilterConfig(cfg.silver_rate))
    silver = merge_aug_golden([], kept)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "silver.jsonl").write_text(write_corpus(silver), encoding="utf-8")
    kept_ids = {s.generated.id for s in kept}
    _write_report(out, "samples.jsonl",
                  (sample_report_line(s, s.generated.id in kept_ids) for s in samples))
    if not args.no_figures:
        from . import figures
        figures.pll_figure([s.pll for s in kept],
                           [s.pll for s in samples
                            if s.is_silver and s.generated.id not in kept_ids],
                           out / "silver_pll.png")
    silver_total = sum(1 for s in samples if s.is_silver)
    print(f"{len(samples)} sample(s): {silver_total} silver, "
          f"{len(samples) - silver_total} none-silver, {len(kept)} kept")
    return 0


def cmd_evaluate(args) -> int:
    labels = _load_labels(args)
    gold = _load_corpus(args.gold, args)
    predicted = _load_corpus(args.predicted, args)
    try:
        result = span_prf(gold, predicted, labels)
    except ValueError as exc:
        raise CorpusError(str(exc)) from None
    print(render_eval_text(result))
    if args.report_dir:
        _write_report(args.report_dir, "eval.jsonl", eval_report_rows(result))
        from . import figures
        figures.eval_figure(result, Path(args.report_dir) / "eval.png")
    return 0


def cmd_sweep(args) -> int:
    rows = []
    seen_rates = set()
    for pair in args.pairs:
        rate_text, sep, path = pair.partition("=")
        if not sep:
            raise ConfigError(f"expected rate=metric-file, got {pair!r}")
        try:
            rate = float(rate_text)
        except ValueError:
            raise ConfigError(f"bad rate {rate_text!r} in {pair!r}") from None
        if not 0 < rate <= 1:
            raise ConfigError(f"rate must be in (0, 1], got {rate}")
        if rate in seen_rates:
            raise ConfigError(f"duplicate rate {rate}")
        seen_rates.add(rate)
        table = parse_eval_report(_read_text(path).splitlines())
        try:
            micro = float(table[("micro", None, "f1")])
            macro = float(table[("macro", None, "f1")])
        except KeyError as exc:
            raise ConfigError(f"metric file {path} lacks {exc.args[0]}") from None
        rows.append((rate, micro, macro))
    rows.sort(key=lambda row: row[0])
    print("rate    f_micro  f_macro")
    for rate, micro, macro in rows:
        print(f"{rate:<7.2f} {100 * micro:>7.2f}  {100 * macro:>7.2f}")
    if args.report_dir:
        report = []
        for rate, micro, macro in rows:
            from .metrics import report_row
            report.append(report_row("sweep", "f_micro", micro, label=f"{rate}"))
            report.append(report_row("sweep", "f_macro", macro, label=f"{rate}"))
        _write_report(args.report_dir, "sweep.jsonl", report)
        from . import figures
        figures.sweep_figure(rows, Path(args.report_dir) / "sweep.png")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_corpus_flags(sub, with_format=True):
    sub.add_argument("--labels", help="comma-separated label set (default PER,ORG,GPE,FAC,WEA,LOC,VEH)")
    sub.add_argument("--stopwords", help="stopword list file, one word per line")
    if with_format:
        sub.add_argument("--format", choices=FORMATS, default=FORMAT_JSONL,
                         help="corpus file format")


def _add_config_flags(sub):
    sub.add_argument("--config", help="key = value run configuration file")
    sub.add_argument("--corpus", help="input corpus (jsonl)")
    sub.add_argument("--out-dir", dest="out_dir", help="output directory")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--labels")
    sub.add_argument("--stopwords")
    sub.add_argument("--max-depth", dest="max_depth", type=int)
    sub.add_argument("--keyword-ratio", dest="keyword_ratio", type=float)
    sub.add_argument("--base-mask-rate", dest="base_mask_rate", type=float)
    sub.add_argument("--fusion-mask-rate", dest="fusion_mask_rate", type=float)
    sub.add_argument("--top-n", dest="top_n", type=int)
    sub.add_argument("--silver-rate", dest="silver_rate", type=float)
    sub.add_argument("--max-len", dest="max_len", type=int)
    sub.add_argument("--pool", type=int, help="worker-pool size (output bytes do not depend on it)")
    sub.add_argument("--smoothing", type=float)
    sub.add_argument("--worker-timeout", dest="worker_timeout", type=float)
    sub.add_argument("--fill-backend", dest="fill_backend")
    sub.add_argument("--score-backend", dest="score_backend")
    sub.add_argument("--embed-backend", dest="embed_backend")
    sub.add_argument("--attention-backend", dest="attention_backend")
    sub.add_argument("--worker", help="default worker command for worker backends")
    sub.add_argument("--no-figures", action="store_true", help="skip PNG rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nestaug",
        description="Corpus augmentation toolkit for nested named-entity recognition")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("stats", help="corpus statistics (sentences, entities, nesting)")
    sub.add_argument("corpus")
    _add_corpus_flags(sub)
    sub.add_argument("--report-dir", dest="report_dir")
    sub.set_defaults(func=cmd_stats)

    sub = commands.add_parser("correlate", help="label nesting correlation matrix")
    sub.add_argument("corpus")
    _add_corpus_flags(sub)
    sub.add_argument("--report-dir", dest="report_dir")
    sub.set_defaults(func=cmd_correlate)

    sub = commands.add_parser("linearize", help="corpus to sentinel-bracketed sequences")
    sub.add_argument("corpus")
    _add_corpus_flags(sub)
    sub.add_argument("-o", "--output")
    sub.set_defaults(func=cmd_linearize)

    sub = commands.add_parser("delinearize", help="sentinel-bracketed sequences to corpus jsonl")
    sub.add_argument("input", help="id<TAB>items file")
    _add_corpus_flags(sub, with_format=False)
    sub.add_argument("--max-depth", dest="max_depth", type=int, default=None)
    sub.add_argument("-o", "--output")
    sub.set_defaults(func=cmd_delinearize)

    sub = commands.add_parser("augment", help="run the full augmentation pipeline")
    _add_config_flags(sub)
    sub.set_defaults(func=cmd_augment)

    sub = commands.add_parser("filter", help="classify, rank, and select generated sequences")
    _add_config_flags(sub)
    sub.add_argument("--generated", required=True, help="id<TAB>items file of generated sequences")
    sub.set_defaults(func=cmd_filter)

    sub = commands.add_parser("evaluate", help="span-level precision/recall/F1")
    sub.add_argument("gold")
    sub.add_argument("predicted")
    _add_corpus_flags(sub)
    sub.add_argument("--report-dir", dest="report_dir")
    sub.set_defaults(func=cmd_evaluate)

    sub = commands.add_parser("sweep", help="tabulate metrics across kept-share rates")
    sub.add_argument("pairs", nargs="+", metavar="RATE=METRIC_FILE",
                     help="kept-share rate and the eval report measured at it")
    sub.add_argument("--report-dir", dest="report_dir")
    sub.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GatewayError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

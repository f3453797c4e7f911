"""Span-level precision/recall/F1 and the report renderers."""

import json
import random

import pytest

from nestaug.corpus import (
    CorpusStats,
    LabelSet,
    Lexicon,
    NestedAnnotation,
    Span,
    corpus_stats,
    label_correlation,
)
from nestaug.metrics import (
    PRF,
    correlation_report_rows,
    eval_report_rows,
    parse_eval_report,
    render_correlation_text,
    render_eval_text,
    render_stats_text,
    report_row,
    span_prf,
    stats_report_rows,
)
from oracles import oracle_span_prf

from conftest import random_corpus


def make(sid, tokens, spans):
    lex = Lexicon()
    return NestedAnnotation.create(sid, [lex.token(t, i) for i, t in enumerate(tokens)],
                                   [Span(*s) for s in spans])


GOLD = [
    make("s1", ["a", "b"], [(0, 1, "PER"), (1, 2, "ORG")]),
    make("s2", ["c", "d"], [(0, 2, "GPE")]),
]
PRED = [
    make("s1", ["a", "b"], [(0, 1, "PER"), (1, 2, "GPE")]),
    make("s2", ["c", "d"], [(0, 2, "GPE"), (0, 1, "PER")]),
]


def test_prf_arithmetic_and_zero_guards():
    assert PRF(0, 0, 0).precision == 0.0
    assert PRF(0, 0, 0).recall == 0.0
    assert PRF(0, 0, 0).f1 == 0.0
    counts = PRF(3, 1, 2)
    assert counts.precision == pytest.approx(0.75)
    assert counts.recall == pytest.approx(0.6)
    assert counts + PRF(1, 1, 1) == PRF(4, 2, 3)


def test_span_prf_hand_example():
    result = span_prf(GOLD, PRED)
    assert result.micro == PRF(tp=2, fp=2, fn=1)
    assert result.micro.precision == pytest.approx(0.5)
    assert result.micro.recall == pytest.approx(2 / 3)
    assert result.micro.f1 == pytest.approx(4 / 7)
    assert result.per_label["PER"] == PRF(1, 1, 0)
    assert result.per_label["ORG"] == PRF(0, 0, 1)
    assert result.per_label["GPE"] == PRF(1, 1, 0)
    assert result.per_label["FAC"] == PRF(0, 0, 0)
    # zero-count labels stay out of the macro average
    assert set(result.macro_labels) == {"PER", "ORG", "GPE"}
    assert result.macro_f1 == pytest.approx((2 / 3 + 0.0 + 2 / 3) / 3)


def test_span_prf_exact_match_only():
    gold = [make("s1", ["a", "b", "c"], [(0, 2, "PER")])]
    offset = [make("s1", ["a", "b", "c"], [(0, 3, "PER")])]
    result = span_prf(gold, offset)
    assert result.micro == PRF(0, 1, 1)


def test_span_prf_requires_same_sentences():
    with pytest.raises(ValueError, match="ids differ"):
        span_prf(GOLD, PRED[:1])


def test_span_prf_perfect_prediction(small_corpus):
    result = span_prf(small_corpus, small_corpus)
    assert result.micro.fp == 0 and result.micro.fn == 0
    if result.micro.tp:
        assert result.micro.f1 == pytest.approx(1.0)
        assert result.macro_f1 == pytest.approx(1.0)


def test_span_prf_matches_oracle_random():
    rng = random.Random(17)
    labels = LabelSet()
    for trial in range(40):
        gold = random_corpus(rng.randrange(100_000), rng.randint(1, 8), max_tokens=10)
        pred = random_corpus(rng.randrange(100_000), len(gold), max_tokens=10)
        pred = [NestedAnnotation.create(g.id, g.tokens, p.spans)
                for g, p in zip(gold, pred)
                if max([s.end for s in p.spans], default=0) <= len(g.tokens)]
        gold = [g for g in gold if g.id in {p.id for p in pred}]
        got = span_prf(gold, pred, labels)
        want_micro, want_per_label, want_macro = oracle_span_prf(gold, pred, labels)
        got_micro = (got.micro.precision, got.micro.recall, got.micro.f1)
        assert got_micro == pytest.approx(want_micro, abs=1e-12)
        for label, rates in want_per_label.items():
            counts = got.per_label[label]
            assert (counts.precision, counts.recall, counts.f1) == \
                pytest.approx(rates, abs=1e-12)
        assert got.macro_f1 == pytest.approx(want_macro, abs=1e-12)


def test_report_row_shapes():
    assert json.loads(report_row("micro", "f1", 0.5)) == \
        {"section": "micro", "metric": "f1", "value": 0.5}
    assert json.loads(report_row("per_label", "f1", 1.0, label="PER")) == \
        {"section": "per_label", "label": "PER", "metric": "f1", "value": 1.0}


def test_eval_report_rows_round_trip():
    result = span_prf(GOLD, PRED)
    table = parse_eval_report(eval_report_rows(result))
    assert table[("micro", None, "precision")] == pytest.approx(0.5)
    assert table[("micro", None, "f1")] == pytest.approx(4 / 7)
    assert table[("per_label", "PER", "f1")] == pytest.approx(2 / 3)
    assert table[("macro", None, "f1")] == pytest.approx(result.macro_f1)


def test_render_eval_text_mentions_exclusion():
    text = render_eval_text(span_prf(GOLD, PRED))
    assert "micro" in text
    assert "macro f1" in text
    assert "excluded" in text
    assert "57.14" in text  # micro f1 as a percentage


def test_stats_reports():
    stats = [("golden", CorpusStats(2, 1, 3, 1))]
    rows = stats_report_rows(stats)
    table = parse_eval_report(rows)
    assert table[("golden_stats", None, "sentences")] == 2
    assert table[("golden_stats", None, "nested_entities")] == 1
    text = render_stats_text(stats)
    assert "golden" in text and "nested_entities" in text.splitlines()[0]


def test_correlation_reports():
    ann = make("s1", ["a"], [(0, 1, "PER"), (0, 1, "ORG")])
    matrix = label_correlation([ann])
    table = parse_eval_report(correlation_report_rows(matrix))
    assert table[("correlation", "PER,ORG", "count")] == 1
    assert table[("correlation", "ORG,PER", "count")] == 1
    assert table[("correlation", "PER,GPE", "count")] == 0
    text = render_correlation_text(matrix)
    assert text.splitlines()[0].startswith("inside\\outside")
    assert corpus_stats([ann]).num_nested_entities == 2

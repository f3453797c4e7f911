"""Span-level evaluation and plain-text / jsonl report rendering.

A predicted span counts as correct only when its (start, end, label) triple
exactly matches a gold span of the same sentence.  Micro scores aggregate
raw counts over all sentences; the macro score averages per-label F1 over
the configured label set, skipping labels that appear in neither gold nor
predictions (their F1 would be 0/0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import CorpusStats, CorrelationMatrix, LabelSet, NestedAnnotation


@dataclass(frozen=True)
class PRF:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp > 0 else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn > 0 else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def __add__(self, other: "PRF") -> "PRF":
        return PRF(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class EvalResult:
    micro: PRF
    per_label: dict[str, PRF]
    macro_f1: float
    macro_labels: tuple[str, ...]  # labels that entered the macro average


def span_prf(gold: Sequence[NestedAnnotation], predicted: Sequence[NestedAnnotation],
             label_set: LabelSet | None = None) -> EvalResult:
    label_set = label_set or LabelSet()
    gold_by_id = {ann.id: ann for ann in gold}
    pred_by_id = {ann.id: ann for ann in predicted}
    if set(gold_by_id) != set(pred_by_id):
        only_gold = sorted(set(gold_by_id) - set(pred_by_id))[:3]
        only_pred = sorted(set(pred_by_id) - set(gold_by_id))[:3]
        raise ValueError(
            f"gold and predicted sentence ids differ "
            f"(gold-only: {only_gold}, predicted-only: {only_pred})")
    per_label = {label: PRF(0, 0, 0) for label in label_set}
    for sid, gold_ann in gold_by_id.items():
        pred_ann = pred_by_id[sid]
        for label in label_set:
            g = {s for s in gold_ann.spans if s.label == label}
            p = {s for s in pred_ann.spans if s.label == label}
            per_label[label] = per_label[label] + PRF(
                tp=len(g & p), fp=len(p - g), fn=len(g - p))
    micro = PRF(0, 0, 0)
    for counts in per_label.values():
        micro = micro + counts
    macro_labels = tuple(label for label in label_set
                         if per_label[label] != PRF(0, 0, 0))
    macro_f1 = (sum(per_label[label].f1 for label in macro_labels) / len(macro_labels)
                if macro_labels else 0.0)
    return EvalResult(micro=micro, per_label=per_label,
                      macro_f1=macro_f1, macro_labels=macro_labels)


# ---------------------------------------------------------------------------
# Report rendering: text to stdout, jsonl rows for files
# ---------------------------------------------------------------------------

def report_row(section: str, metric: str, value, label: str | None = None) -> str:
    record: dict = {"section": section}
    if label is not None:
        record["label"] = label
    record["metric"] = metric
    record["value"] = value
    return json.dumps(record, separators=(",", ":"), ensure_ascii=False)


STAT_FIELDS = (
    ("sentences", "num_sentences"),
    ("nested_sentences", "num_nested_sentences"),
    ("entities", "num_entities"),
    ("nested_entities", "num_nested_entities"),
)


def stats_report_rows(stats_by_name: Sequence[tuple[str, CorpusStats]]) -> list[str]:
    rows = []
    for name, stats in stats_by_name:
        for metric, attr in STAT_FIELDS:
            rows.append(report_row(f"{name}_stats", metric, getattr(stats, attr)))
    return rows


def render_stats_text(stats_by_name: Sequence[tuple[str, CorpusStats]]) -> str:
    headers = [metric for metric, _ in STAT_FIELDS]
    name_width = max([len("corpus")] + [len(name) for name, _ in stats_by_name])
    widths = [max(len(h), 8) for h in headers]
    lines = ["corpus".ljust(name_width) + "  "
             + "  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    for name, stats in stats_by_name:
        cells = [str(getattr(stats, attr)).rjust(w)
                 for (_, attr), w in zip(STAT_FIELDS, widths)]
        lines.append(name.ljust(name_width) + "  " + "  ".join(cells))
    return "\n".join(lines)


def correlation_report_rows(matrix: CorrelationMatrix) -> list[str]:
    rows = []
    for outside in matrix.labels:
        for inside in matrix.labels:
            rows.append(report_row("correlation", "count", matrix.get(outside, inside),
                                   label=f"{outside},{inside}"))
    return rows


def render_correlation_text(matrix: CorrelationMatrix) -> str:
    """Inside labels as rows, outside (containing) labels as columns."""
    labels = list(matrix.labels)
    head = "inside\\outside"
    width = max([len(head)] + [len(l) for l in labels])
    cell = max(6, max(len(l) for l in labels))
    lines = [head.ljust(width) + "  " + "  ".join(l.rjust(cell) for l in labels)]
    for inside, counts in matrix.rows():
        lines.append(inside.ljust(width) + "  "
                     + "  ".join(str(c).rjust(cell) for c in counts))
    return "\n".join(lines)


def eval_report_rows(result: EvalResult) -> list[str]:
    rows = [
        report_row("micro", "precision", result.micro.precision),
        report_row("micro", "recall", result.micro.recall),
        report_row("micro", "f1", result.micro.f1),
    ]
    for label, counts in result.per_label.items():
        rows.append(report_row("per_label", "precision", counts.precision, label=label))
        rows.append(report_row("per_label", "recall", counts.recall, label=label))
        rows.append(report_row("per_label", "f1", counts.f1, label=label))
    rows.append(report_row("macro", "f1", result.macro_f1))
    return rows


def render_eval_text(result: EvalResult) -> str:
    lines = ["label    precision   recall       f1     tp     fp     fn"]

    def row(name: str, counts: PRF) -> str:
        return (f"{name:<8} {100 * counts.precision:>9.2f} {100 * counts.recall:>8.2f} "
                f"{100 * counts.f1:>8.2f} {counts.tp:>6} {counts.fp:>6} {counts.fn:>6}")

    for label, counts in result.per_label.items():
        lines.append(row(label, counts))
    lines.append(row("micro", result.micro))
    lines.append(f"macro f1: {100 * result.macro_f1:.2f} "
                 f"(over {', '.join(result.macro_labels) or 'no labels'})")
    lines.append("labels absent from both gold and predictions are excluded "
                 "from the macro average")
    return "\n".join(lines)


def parse_eval_report(lines: Iterable[str]) -> dict[tuple[str, str | None, str], object]:
    """Load report rows back into {(section, label, metric): value}."""
    table: dict[tuple[str, str | None, str], object] = {}
    for line in lines:
        if not line.strip():
            continue
        record = json.loads(line)
        table[(record["section"], record.get("label"), record["metric"])] = record["value"]
    return table

"""Confidence filtering for generated samples.

A generated sequence is "silver" when it still decodes to a valid annotation
whose span-label multiset matches its source exactly (positions may shift:
masked context regenerates at different lengths, so only labels are
compared).  Silver samples are then ranked by fluency (mean per-token
log-probability) and the top share kept; the survivors are appended to the
golden corpus under a distinct id prefix.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .codec import FUSE, LinearizedSequence, delinearize
from .corpus import (
    DEFAULT_MAX_DEPTH,
    CorpusError,
    DuplicateSentenceIdError,
    Lexicon,
    LabelSet,
    NestedAnnotation,
    token_depths,
)

VERDICT_SILVER = "silver"
VERDICT_NONE_SILVER = "none_silver"
REASON_PARSE_FAILURE = "parse_failure"
REASON_LABEL_MISMATCH = "label_mismatch"

SILVER_ID_PREFIX = "aug-"


@dataclass(frozen=True)
class AugmentedSample:
    source_id: str
    generated: LinearizedSequence
    recovered: NestedAnnotation | None
    verdict: str
    reason: str | None = None
    pll: float | None = None

    @property
    def is_silver(self) -> bool:
        return self.verdict == VERDICT_SILVER

    def scored(self, pll: float) -> "AugmentedSample":
        if not math.isfinite(pll):
            raise ValueError(f"non-finite score for {self.generated.id}")
        return replace(self, pll=pll)


@dataclass(frozen=True)
class FilterConfig:
    silver_rate: float = 0.70

    def __post_init__(self):
        if not 0 < self.silver_rate <= 1:
            raise ValueError(f"silver rate must be in (0, 1], got {self.silver_rate}")


def classify_against_labels(generated: LinearizedSequence, expected_labels: Counter, *,
                            source_id: str,
                            label_set: LabelSet | None = None,
                            lexicon: Lexicon | None = None,
                            max_depth: int = DEFAULT_MAX_DEPTH) -> AugmentedSample:
    """Verdict for a generated sequence against an expected label multiset.

    Fuse separators are dropped before decoding: they delimit the two fused
    halves but carry no annotation content.
    """
    items = [item for item in generated.items if item != FUSE]
    try:
        recovered = delinearize(items, id=generated.id, label_set=label_set,
                                lexicon=lexicon, max_depth=max_depth)
    except CorpusError as exc:
        return AugmentedSample(source_id=source_id, generated=generated, recovered=None,
                               verdict=VERDICT_NONE_SILVER,
                               reason=f"{REASON_PARSE_FAILURE}: {exc.bare_message}")
    if recovered.label_multiset() != expected_labels:
        return AugmentedSample(source_id=source_id, generated=generated, recovered=recovered,
                               verdict=VERDICT_NONE_SILVER, reason=REASON_LABEL_MISMATCH)
    return AugmentedSample(source_id=source_id, generated=generated, recovered=recovered,
                           verdict=VERDICT_SILVER)


def classify_silver(generated: LinearizedSequence, source: NestedAnnotation, *,
                    label_set: LabelSet | None = None,
                    lexicon: Lexicon | None = None,
                    max_depth: int = DEFAULT_MAX_DEPTH) -> AugmentedSample:
    return classify_against_labels(generated, source.label_multiset(),
                                   source_id=source.id, label_set=label_set,
                                   lexicon=lexicon, max_depth=max_depth)


def selection_size(rate: float, silver_count: int) -> int:
    """ceil(rate * count), guarded against float fuzz (0.7*10 must be 7)."""
    return math.ceil(round(rate * silver_count, 9))


def rank_and_select(samples: Sequence[AugmentedSample],
                    cfg: FilterConfig) -> list[AugmentedSample]:
    """Keep the top-share silver samples by score.

    Ties break by ascending source id, then by generation (input) order, so
    selection is deterministic; every kept score is >= every dropped score.
    """
    silver = [(order, sample) for order, sample in enumerate(samples) if sample.is_silver]
    for _, sample in silver:
        if sample.pll is None:
            raise ValueError(f"silver sample {sample.generated.id} was never scored")
    keep = selection_size(cfg.silver_rate, len(silver))
    silver.sort(key=lambda pair: (-pair[1].pll, pair[1].source_id, pair[0]))
    return [sample for _, sample in silver[:keep]]


def merge_aug_golden(golden: Sequence[NestedAnnotation],
                     selected: Sequence[AugmentedSample],
                     prefix: str = SILVER_ID_PREFIX) -> list[NestedAnnotation]:
    """Concatenate golden with the kept silver annotations, ids prefixed."""
    merged = list(golden)
    seen = {ann.id for ann in merged}
    if len(seen) != len(merged):
        raise DuplicateSentenceIdError("golden corpus has duplicate ids")
    for sample in selected:
        if sample.recovered is None:
            raise ValueError(f"sample {sample.generated.id} has no recovered annotation")
        renamed = replace(sample.recovered, id=prefix + sample.recovered.id)
        if renamed.id in seen:
            raise DuplicateSentenceIdError(f"id collision after prefixing: {renamed.id!r}")
        seen.add(renamed.id)
        merged.append(renamed)
    return merged


def depth_prefilter(corpus: Iterable[NestedAnnotation],
                    max_depth: int = DEFAULT_MAX_DEPTH) -> tuple[list[NestedAnnotation], list[str]]:
    """Drop sentences where any token sits under more than max_depth labels.

    Returns (kept sentences, removed sentence ids).
    """
    kept: list[NestedAnnotation] = []
    removed: list[str] = []
    for ann in corpus:
        depths = token_depths(ann)
        if depths and max(depths) > max_depth:
            removed.append(ann.id)
        else:
            kept.append(ann)
    return kept, removed


def sample_report_line(sample: AugmentedSample, kept: bool) -> str:
    record: dict = {"source_id": sample.source_id, "verdict": sample.verdict}
    if sample.reason is not None:
        record["reason"] = sample.reason
    if sample.pll is not None:
        record["pll"] = sample.pll
    record["kept"] = kept
    return json.dumps(record, separators=(",", ":"), ensure_ascii=False)

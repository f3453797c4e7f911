"""Keyword selection and masked-template construction.

A template is a linearized sequence where context tokens that are neither
entities nor keywords are replaced by mask placeholders (consecutive masks
collapsed to one).  Keywords are the context tokens receiving the most
attention from entity tokens; a Gaussian-sampled masking rate then hides a
random share of them per generation pass, so downstream generators see a
different degree of context each time.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

from .codec import MASK, close_sentinel, open_sentinel, sentinel_kind
from .corpus import NestedAnnotation, iter_span_events

# A single context token may soak up most of the attention mass (an
# attention sink); its share of total entity-outgoing attention is capped
# so it stays rankable without drowning everything else.
ATTENTION_SHARE_CAP = 0.10

AttentionMap = Sequence[Sequence[float]]


def round_half_up(x: float) -> int:
    """round() half-away-from-zero for non-negative x; Python's round() is
    banker's rounding, which would make round(0.5*K) platform-honest but
    surprising."""
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class KeywordSet:
    """Sorted source-token indices of the selected keywords."""

    indices: tuple[int, ...]

    def __post_init__(self):
        if list(self.indices) != sorted(set(self.indices)):
            raise ValueError("keyword indices must be sorted and unique")

    @property
    def count(self) -> int:
        return len(self.indices)


def _check_attention(attention: AttentionMap, n: int) -> None:
    if len(attention) != n:
        raise ValueError(f"attention map has {len(attention)} rows for {n} tokens")
    for row in attention:
        if len(row) != n:
            raise ValueError("attention map is not square")
        for v in row:
            if v < 0:
                raise ValueError("attention weights must be non-negative")


def select_keywords(annotation: NestedAnnotation, attention: AttentionMap,
                    ratio: float = 0.3) -> KeywordSet:
    """Pick the top ceil(ratio * candidates) context tokens by entity attention.

    Candidate tokens are outside every entity span and neither stopwords nor
    punctuation.  Each candidate is scored by the share of total
    entity-outgoing attention it receives, clipped at
    ``ATTENTION_SHARE_CAP``; ties break toward the lower index.
    """
    if not 0 < ratio <= 1:
        raise ValueError(f"keyword ratio must be in (0, 1], got {ratio}")
    n = len(annotation.tokens)
    _check_attention(attention, n)
    entity = annotation.entity_token_indices()
    if not entity:
        return KeywordSet(())
    total = sum(attention[i][j] for i in entity for j in range(n))
    scores = []
    for j in range(n):
        received = sum(attention[i][j] for i in entity)
        share = received / total if total > 0 else 0.0
        scores.append(min(share, ATTENTION_SHARE_CAP))
    candidates = [j for j in range(n)
                  if j not in entity
                  and not annotation.tokens[j].is_punct
                  and not annotation.tokens[j].is_stopword]
    take = math.ceil(ratio * len(candidates))
    ranked = sorted(candidates, key=lambda j: (-scores[j], j))
    return KeywordSet(tuple(sorted(ranked[:take])))


@dataclass(frozen=True)
class ItemSpan:
    """An entity span located by its sentinel item positions inside a template."""

    open_pos: int
    close_pos: int
    label: str


@dataclass(frozen=True)
class Template:
    """A maskable linearized sequence with its bookkeeping.

    ``keyword_items`` and ``entity_spans`` are in item coordinates (positions
    into ``items``): masking and fusion reshuffle item positions, and a fused
    template mixes two source sentences, so source-token indices would not
    survive either operation.
    """

    source_id: str
    items: tuple[str, ...]
    keyword_items: tuple[int, ...]
    entity_spans: tuple[ItemSpan, ...]

    def label_multiset(self) -> Counter:
        return Counter(span.label for span in self.entity_spans)

    def validate(self) -> "Template":
        for prev, item in zip(self.items, self.items[1:]):
            if prev == MASK and item == MASK:
                raise ValueError(f"template {self.source_id}: consecutive masks")
        for pos in self.keyword_items:
            if not 0 <= pos < len(self.items) or sentinel_kind(self.items[pos]) is not None:
                raise ValueError(f"template {self.source_id}: keyword position {pos} is not a text item")
        if list(self.keyword_items) != sorted(set(self.keyword_items)):
            raise ValueError(f"template {self.source_id}: keyword positions not sorted/unique")
        stack: list[tuple[str, int]] = []
        found: list[ItemSpan] = []
        for pos, item in enumerate(self.items):
            kind = sentinel_kind(item)
            if kind is None or kind[0] in ("mask", "fuse"):
                continue
            if kind[0] == "open":
                stack.append((kind[1], pos))
            else:
                if not stack or stack[-1][0] != kind[1]:
                    raise ValueError(f"template {self.source_id}: unbalanced sentinels")
                label, open_pos = stack.pop()
                found.append(ItemSpan(open_pos, pos, label))
        if stack:
            raise ValueError(f"template {self.source_id}: unclosed sentinel")
        if sorted(found, key=lambda s: (s.open_pos, s.close_pos)) != \
                sorted(self.entity_spans, key=lambda s: (s.open_pos, s.close_pos)):
            raise ValueError(f"template {self.source_id}: span metadata out of sync with items")
        return self


def _collapse_masks(items: Sequence[str]) -> tuple[tuple[str, ...], list[int | None]]:
    """Collapse runs of masks to one; return new items and old->new index map."""
    out: list[str] = []
    index_map: list[int | None] = []
    for item in items:
        if item == MASK and out and out[-1] == MASK:
            index_map.append(None)
            continue
        index_map.append(len(out))
        out.append(item)
    return tuple(out), index_map


def build_template(annotation: NestedAnnotation, keywords: KeywordSet) -> Template:
    """Linearize, then mask every context token that is not a kept keyword."""
    n = len(annotation.tokens)
    entity = annotation.entity_token_indices()
    for idx in keywords.indices:
        if not 0 <= idx < n:
            raise ValueError(f"keyword index {idx} out of range for {n} tokens")
        if idx in entity:
            raise ValueError(f"keyword index {idx} is an entity token")
    keep = set(keywords.indices)
    items: list[str] = []
    sources: list[int | None] = []
    open_positions: dict[object, int] = {}
    spans: list[ItemSpan] = []
    for kind, payload in iter_span_events(annotation):
        if kind == "open":
            open_positions[payload] = len(items)
            items.append(open_sentinel(payload.label))
            sources.append(None)
        elif kind == "close":
            spans.append(ItemSpan(open_positions[payload], len(items), payload.label))
            items.append(close_sentinel(payload.label))
            sources.append(None)
        else:
            idx = payload
            if idx in entity or idx in keep:
                items.append(annotation.tokens[idx].text)
            else:
                items.append(MASK)
            sources.append(idx)
    keyword_positions = [pos for pos, src in enumerate(sources) if src in keep]
    collapsed, index_map = _collapse_masks(items)
    return Template(
        source_id=annotation.id,
        items=collapsed,
        keyword_items=tuple(index_map[pos] for pos in keyword_positions),
        entity_spans=tuple(ItemSpan(index_map[s.open_pos], index_map[s.close_pos], s.label)
                           for s in spans),
    ).validate()


@dataclass(frozen=True)
class GaussianMaskConfig:
    """Dynamic masking rate distribution: mean mu, standard deviation 1/K."""

    mu: float = 0.3

    def __post_init__(self):
        if not 0 <= self.mu <= 1:
            raise ValueError(f"mask rate mean must be in [0, 1], got {self.mu}")

    def sigma(self, keyword_count: int) -> float:
        return 1.0 / keyword_count


def sample_mask_rate(cfg: GaussianMaskConfig, keyword_count: int, rng) -> float:
    """Draw a masking rate from N(mu, (1/K)^2), clamped to [0, 1]; 0 if K=0."""
    if keyword_count <= 0:
        return 0.0
    u = rng.random()
    # inv_cdf is undefined at exactly 0; random() never returns 1.0
    u = max(u, 1e-12)
    rate = NormalDist(cfg.mu, cfg.sigma(keyword_count)).inv_cdf(u)
    return min(max(rate, 0.0), 1.0)


def dynamic_mask(template: Template, cfg: GaussianMaskConfig, rng,
                 rate: float | None = None) -> Template:
    """Mask round(rate*K) keywords chosen uniformly without replacement.

    ``rate`` defaults to a fresh draw from ``cfg``; passing it explicitly
    pins the rate for tests.  Entity content is never touched.
    """
    count = len(template.keyword_items)
    if rate is None:
        rate = sample_mask_rate(cfg, count, rng)
    if not 0 <= rate <= 1:
        raise ValueError(f"mask rate must be in [0, 1], got {rate}")
    masked = round_half_up(rate * count)
    pool = list(template.keyword_items)
    for i in range(masked):  # partial Fisher-Yates: first `masked` entries
        j = rng.randrange(i, len(pool))
        pool[i], pool[j] = pool[j], pool[i]
    victims = set(pool[:masked])
    items = tuple(MASK if pos in victims else item for pos, item in enumerate(template.items))
    collapsed, index_map = _collapse_masks(items)
    survivors = [index_map[pos] for pos in template.keyword_items if pos not in victims]
    return Template(
        source_id=template.source_id,
        items=collapsed,
        keyword_items=tuple(survivors),
        entity_spans=tuple(ItemSpan(index_map[s.open_pos], index_map[s.close_pos], s.label)
                           for s in template.entity_spans),
    ).validate()

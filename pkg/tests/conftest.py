"""Shared fixtures: a seeded generator of random valid nested annotations."""

from __future__ import annotations

import random

import pytest

from nestaug.corpus import DEFAULT_LABELS, LabelSet, Lexicon, NestedAnnotation, Span

STOPWORDS = ("the", "of", "and", "a", "to", "in")

WORD_POOL = (
    "city", "river", "union", "force", "zone", "treaty", "council", "port",
    "summit", "bridge", "valley", "garrison", "market", "harbor", "press",
    "the", "of", "and", "a", "to", "in", ",", ".", ";",
) + tuple(f"w{i}" for i in range(40))


@pytest.fixture
def lexicon():
    return Lexicon(STOPWORDS)


@pytest.fixture
def labels():
    return LabelSet()


def random_annotation(rng: random.Random, sid: str, *, max_tokens=40, max_depth=3,
                      labels=DEFAULT_LABELS, lexicon: Lexicon | None = None,
                      span_attempts=8) -> NestedAnnotation:
    """One random valid annotation: laminar spans, bounded depth.

    Candidate spans are inserted only when they keep the family crossing-free,
    duplicate-free, and within the depth bound, so every output is valid by
    construction and still hits equal-extent and deeply nested shapes.
    """
    lexicon = lexicon or Lexicon(STOPWORDS)
    label_pool = tuple(labels)
    n = rng.randint(1, max_tokens)
    tokens = tuple(lexicon.token(rng.choice(WORD_POOL), i) for i in range(n))
    spans: list[Span] = []
    depths = [0] * n
    for _ in range(span_attempts):
        start = rng.randrange(n)
        end = start + 1 + rng.randrange(min(n - start, 8))
        label = rng.choice(label_pool)
        candidate = Span(start, end, label)
        if candidate in spans:
            continue
        if any(candidate.crosses(existing) for existing in spans):
            continue
        if any(depths[i] + 1 > max_depth for i in range(start, end)):
            continue
        spans.append(candidate)
        for i in range(start, end):
            depths[i] += 1
    return NestedAnnotation.create(sid, tokens, spans)


def random_corpus(seed: int, size: int, **kwargs) -> list[NestedAnnotation]:
    rng = random.Random(seed)
    return [random_annotation(rng, f"s{i}", **kwargs) for i in range(size)]


@pytest.fixture
def small_corpus():
    return random_corpus(11, 12, max_tokens=14)

"""Sentence retrieval by cosine similarity, and template fusion.

Each sentence gets an embedding; for every query sentence the most similar
other sentences are retrieved, and the query's template is fused with a
neighbor's template into one longer, context-enriched template separated by
a fuse sentinel.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .codec import FUSE, sentinel_kind
from .templates import ItemSpan, Template

DEFAULT_TOP_N = 1
DEFAULT_MAX_LEN = 256


@dataclass(frozen=True)
class SentenceEmbedding:
    sentence_id: str
    vector: tuple[float, ...]


class TfidfEmbedder:
    """TF-IDF sentence vectors: lowercased terms, smooth idf, L2-normalized.

    idf(t) = ln((1+N)/(1+df(t))) + 1.  Out-of-vocabulary tokens contribute
    nothing; an all-out-of-vocabulary sentence embeds to the zero vector
    (similarity treats zero norms as 0).
    """

    def __init__(self, vocabulary: tuple[str, ...], idf: dict[str, float]):
        self.vocabulary = vocabulary
        self.index = {term: i for i, term in enumerate(vocabulary)}
        self.idf = idf

    @classmethod
    def fit(cls, sentences: Iterable[Sequence[str]]) -> "TfidfEmbedder":
        doc_freq: Counter = Counter()
        n_docs = 0
        for tokens in sentences:
            n_docs += 1
            doc_freq.update({t.lower() for t in tokens})
        vocabulary = tuple(sorted(doc_freq))
        idf = {t: math.log((1 + n_docs) / (1 + doc_freq[t])) + 1.0 for t in vocabulary}
        return cls(vocabulary, idf)

    @property
    def dimension(self) -> int:
        return len(self.vocabulary)

    def embed(self, tokens: Sequence[str]) -> tuple[float, ...]:
        vector = [0.0] * self.dimension
        for term, n in Counter(t.lower() for t in tokens).items():
            i = self.index.get(term)
            if i is not None:
                vector[i] = n * self.idf[term]
        norm = math.sqrt(sum(v * v for v in vector))
        if norm > 0:
            vector = [v / norm for v in vector]
        return tuple(vector)


def similarity(a: SentenceEmbedding, b: SentenceEmbedding) -> float:
    """Cosine similarity; zero-norm vectors compare as 0 rather than NaN."""
    if len(a.vector) != len(b.vector):
        raise ValueError(
            f"embedding dimensions differ: {len(a.vector)} ({a.sentence_id}) "
            f"vs {len(b.vector)} ({b.sentence_id})")
    dot = sum(x * y for x, y in zip(a.vector, b.vector))
    norm_a = math.sqrt(sum(x * x for x in a.vector))
    norm_b = math.sqrt(sum(y * y for y in b.vector))
    if norm_a == 0 or norm_b == 0:
        return 0.0
    return dot / (norm_a * norm_b)


def top_n_similar(query_id: str, embeddings: Sequence[SentenceEmbedding],
                  top_n: int = DEFAULT_TOP_N) -> list[tuple[str, float]]:
    """The top_n most similar sentences to the query, excluding the query.

    Descending score, ties by ascending sentence id; at most N-1 results.
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    by_id = {e.sentence_id: e for e in embeddings}
    if query_id not in by_id:
        raise KeyError(f"no embedding for sentence {query_id!r}")
    query = by_id[query_id]
    scored = [(other.sentence_id, similarity(query, other))
              for other in embeddings if other.sentence_id != query_id]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:top_n]


def fuse_templates(a: Template, b: Template, max_len: int = DEFAULT_MAX_LEN) -> Template:
    """Concatenate two masked templates around a fuse sentinel.

    If the result would exceed max_len items, b is cut back to its largest
    sentinel-balanced prefix that fits, so the fused template still
    delinearizes; spans and keywords beyond the cut disappear from the
    metadata along with their items.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    budget = max(max_len - len(a.items) - 1, 0)
    prefix = _balanced_prefix_length(b.items, budget)
    offset = len(a.items) + 1
    items = a.items + (FUSE,) + b.items[:prefix]
    keywords = a.keyword_items + tuple(
        pos + offset for pos in b.keyword_items if pos < prefix)
    spans = a.entity_spans + tuple(
        ItemSpan(s.open_pos + offset, s.close_pos + offset, s.label)
        for s in b.entity_spans if s.close_pos < prefix)
    return Template(source_id=a.source_id, items=items,
                    keyword_items=keywords, entity_spans=spans).validate()


def _balanced_prefix_length(items: Sequence[str], budget: int) -> int:
    """Length of the largest prefix <= budget with balanced sentinels."""
    best = 0
    depth = 0
    for i, item in enumerate(items[:budget], start=1):
        kind = sentinel_kind(item)
        if kind is not None:
            if kind[0] == "open":
                depth += 1
            elif kind[0] == "close":
                depth -= 1
        if depth == 0:
            best = i
    return best


# ---------------------------------------------------------------------------
# File formats: embedding cache and retrieval report
# ---------------------------------------------------------------------------

def embedding_cache_lines(embeddings: Iterable[SentenceEmbedding]) -> Iterable[str]:
    for e in embeddings:
        yield json.dumps({"sentence_id": e.sentence_id, "vector": list(e.vector)},
                         separators=(",", ":"), ensure_ascii=False)


def parse_embedding_cache(lines: Iterable[str]) -> list[SentenceEmbedding]:
    embeddings = []
    for line in lines:
        if not line.strip():
            continue
        record = json.loads(line)
        embeddings.append(SentenceEmbedding(record["sentence_id"], tuple(record["vector"])))
    return embeddings


def retrieval_report_line(query_id: str, neighbors: Sequence[tuple[str, float]]) -> str:
    # hand-assembled so scores are JSON numbers with exactly 6 decimals
    cells = ",".join(
        f"[{json.dumps(sid, ensure_ascii=False)},{score:.6f}]" for sid, score in neighbors)
    return f'{{"query_id":{json.dumps(query_id, ensure_ascii=False)},"neighbors":[{cells}]}}'

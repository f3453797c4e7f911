"""Independent brute-force oracles.

Each function below recomputes a result from first principles, sharing no
algorithmic structure with the implementation, so the two can be compared
on random inputs.
"""

from __future__ import annotations

import math
from collections import Counter


def contains(outer, inner) -> bool:
    return outer.start <= inner.start and inner.end <= outer.end


def oracle_corpus_stats(annotations):
    """(sentences, nested sentences, entities, nested entities)."""
    n_s = n_ns = n_e = n_ne = 0
    for ann in annotations:
        n_s += 1
        spans = list(ann.spans)
        n_e += len(spans)
        nested_here = 0
        for i, b in enumerate(spans):
            for j, a in enumerate(spans):
                if i != j and contains(a, b):
                    nested_here += 1
                    break
        n_ne += nested_here
        if nested_here:
            n_ns += 1
    return n_s, n_ns, n_e, n_ne


def oracle_label_correlation(annotations) -> Counter:
    """{(outside label, inside label): count} over ordered containment pairs."""
    counts: Counter = Counter()
    for ann in annotations:
        spans = list(ann.spans)
        for i, a in enumerate(spans):
            for j, b in enumerate(spans):
                if i != j and contains(a, b):
                    counts[(a.label, b.label)] += 1
    return counts


def oracle_select_keywords(annotation, attention, ratio, share_cap=0.10):
    """Literal clip, filter, sort, take."""
    n = len(annotation.tokens)
    entity = set()
    for span in annotation.spans:
        entity.update(range(span.start, span.end))
    if not entity:
        return ()
    total = 0.0
    for i in entity:
        for j in range(n):
            total += attention[i][j]
    scores = {}
    for j in range(n):
        received = sum(attention[i][j] for i in entity)
        share = received / total if total > 0 else 0.0
        scores[j] = min(share, share_cap)
    candidates = [j for j in range(n)
                  if j not in entity
                  and not annotation.tokens[j].is_punct
                  and not annotation.tokens[j].is_stopword]
    take = math.ceil(ratio * len(candidates))
    ordered = sorted(candidates, key=lambda j: (-scores[j], j))[:take]
    return tuple(sorted(ordered))


def oracle_cosine(a, b) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


def oracle_top_n(query_id, embeddings, top_n):
    """Exhaustive scan over all other sentences."""
    vectors = {e.sentence_id: e.vector for e in embeddings}
    query = vectors[query_id]
    scored = []
    for sid, vec in vectors.items():
        if sid != query_id:
            scored.append((sid, oracle_cosine(query, vec)))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:top_n]


def oracle_span_prf(gold, predicted, labels):
    """Per-label tp/fp/fn by multiset intersection, then micro and macro."""
    gold_by_id = {ann.id: ann for ann in gold}
    pred_by_id = {ann.id: ann for ann in predicted}
    assert set(gold_by_id) == set(pred_by_id)
    per_label = {}
    for label in labels:
        tp = fp = fn = 0
        for sid in gold_by_id:
            g = Counter((s.start, s.end) for s in gold_by_id[sid].spans if s.label == label)
            p = Counter((s.start, s.end) for s in pred_by_id[sid].spans if s.label == label)
            both = g & p
            tp += sum(both.values())
            fp += sum((p - g).values())
            fn += sum((g - p).values())
        per_label[label] = (tp, fp, fn)

    def prf(tp, fp, fn):
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return precision, recall, f1

    micro = prf(sum(v[0] for v in per_label.values()),
                sum(v[1] for v in per_label.values()),
                sum(v[2] for v in per_label.values()))
    used = [label for label, (tp, fp, fn) in per_label.items() if tp or fp or fn]
    macro_f1 = sum(prf(*per_label[label])[2] for label in used) / len(used) if used else 0.0
    return micro, {label: prf(*counts) for label, counts in per_label.items()}, macro_f1


def oracle_depth_prefilter(annotations, max_depth):
    """Kept ids by per-token cover counting."""
    kept = []
    removed = []
    for ann in annotations:
        worst = 0
        for i in range(len(ann.tokens)):
            depth = sum(1 for span in ann.spans if span.start <= i < span.end)
            worst = max(worst, depth)
        (removed if worst > max_depth else kept).append(ann.id)
    return kept, removed


def oracle_round_half_up(x: float) -> int:
    return math.floor(x + 0.5)

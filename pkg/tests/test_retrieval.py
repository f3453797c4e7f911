"""TF-IDF embeddings, cosine retrieval, and template fusion."""

import json
import math
import random

import pytest

from nestaug.codec import FUSE, MASK, delinearize
from nestaug.corpus import Lexicon, NestedAnnotation, Span
from nestaug.retrieval import (
    SentenceEmbedding,
    TfidfEmbedder,
    embedding_cache_lines,
    fuse_templates,
    parse_embedding_cache,
    retrieval_report_line,
    similarity,
    top_n_similar,
)
from nestaug.templates import KeywordSet, build_template
from oracles import oracle_cosine, oracle_top_n

from conftest import random_corpus


def make(tokens, spans, sid="t"):
    lex = Lexicon()
    return NestedAnnotation.create(sid, [lex.token(t, i) for i, t in enumerate(tokens)],
                                   [Span(*s) for s in spans])


def embed_corpus(corpus):
    embedder = TfidfEmbedder.fit([a.texts() for a in corpus])
    return [SentenceEmbedding(a.id, embedder.embed(a.texts())) for a in corpus]


def test_tfidf_shapes_and_normalization():
    embedder = TfidfEmbedder.fit([["a", "b"], ["a", "c"]])
    assert embedder.dimension == 3
    v = embedder.embed(["a", "b"])
    assert len(v) == 3
    assert math.isclose(math.sqrt(sum(x * x for x in v)), 1.0, rel_tol=1e-12)


def test_tfidf_case_folding_and_idf():
    embedder = TfidfEmbedder.fit([["The", "cat"], ["the", "dog"]])
    assert "the" in embedder.idf and "The" not in embedder.idf
    # "the" appears in both docs, "cat" in one: idf(the) < idf(cat)
    assert embedder.idf["the"] == pytest.approx(math.log(3 / 3) + 1)
    assert embedder.idf["cat"] == pytest.approx(math.log(3 / 2) + 1)


def test_tfidf_oov_embeds_to_zero():
    embedder = TfidfEmbedder.fit([["a"]])
    assert embedder.embed(["zzz"]) == (0.0,)


def test_similarity_matches_oracle_and_handles_zero():
    rng = random.Random(3)
    for _ in range(100):
        a = SentenceEmbedding("a", tuple(rng.uniform(-1, 1) for _ in range(6)))
        b = SentenceEmbedding("b", tuple(rng.uniform(-1, 1) for _ in range(6)))
        assert similarity(a, b) == pytest.approx(oracle_cosine(a.vector, b.vector),
                                                 abs=1e-12)
    zero = SentenceEmbedding("z", (0.0,) * 6)
    assert similarity(zero, a) == 0.0
    assert similarity(a, zero) == 0.0


def test_similarity_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        similarity(SentenceEmbedding("a", (1.0,)), SentenceEmbedding("b", (1.0, 2.0)))


def test_top_n_excludes_query_and_breaks_ties_by_id():
    embeddings = [
        SentenceEmbedding("q", (1.0, 0.0)),
        SentenceEmbedding("b", (1.0, 0.0)),
        SentenceEmbedding("a", (1.0, 0.0)),
        SentenceEmbedding("c", (0.0, 1.0)),
    ]
    got = top_n_similar("q", embeddings, top_n=3)
    assert [sid for sid, _ in got] == ["a", "b", "c"]
    assert got[0][1] == pytest.approx(1.0)
    assert got[2][1] == pytest.approx(0.0)


def test_top_n_truncates_to_population():
    embeddings = [SentenceEmbedding("q", (1.0,)), SentenceEmbedding("a", (1.0,))]
    assert len(top_n_similar("q", embeddings, top_n=10)) == 1
    with pytest.raises(KeyError):
        top_n_similar("missing", embeddings)
    with pytest.raises(ValueError):
        top_n_similar("q", embeddings, top_n=0)


def test_top_n_matches_oracle_random():
    rng = random.Random(13)
    for trial in range(40):
        corpus = random_corpus(rng.randrange(100_000), rng.randint(2, 12))
        embeddings = embed_corpus(corpus)
        query = rng.choice(corpus).id
        n = rng.randint(1, 4)
        got = top_n_similar(query, embeddings, n)
        want = oracle_top_n(query, embeddings, n)
        assert [sid for sid, _ in got] == [sid for sid, _ in want]
        for (_, gs), (_, ws) in zip(got, want):
            assert gs == pytest.approx(ws, abs=1e-12)


def template_of(tokens, spans, keywords=(), sid="t"):
    return build_template(make(tokens, spans, sid), KeywordSet(tuple(keywords)))


def test_fuse_concatenates_with_marker():
    a = template_of(["Paris", "x"], [(0, 1, "GPE")], keywords=[1], sid="a")
    b = template_of(["Bonn", "y"], [(0, 1, "GPE")], keywords=[1], sid="b")
    fused = fuse_templates(a, b)
    assert fused.items == ("<GPE>", "Paris", "</GPE>", "x", FUSE,
                           "<GPE>", "Bonn", "</GPE>", "y")
    assert fused.source_id == "a"
    assert fused.keyword_items == (3, 8)
    assert [s.label for s in fused.entity_spans] == ["GPE", "GPE"]
    assert sorted(fused.label_multiset().elements()) == ["GPE", "GPE"]


def test_fuse_truncates_to_balanced_prefix():
    a = template_of(["Paris"], [(0, 1, "GPE")], sid="a")  # 3 items
    b = template_of(["w", "Bonn", "z"], [(1, 2, "GPE")], keywords=[0, 2], sid="b")
    # b items: w <GPE> Bonn </GPE> z  (5 items)
    # budget 3: only "w" survives (prefix inside <GPE> would be unbalanced)
    fused = fuse_templates(a, b, max_len=3 + 1 + 3)
    assert fused.items == ("<GPE>", "Paris", "</GPE>", FUSE, "w")
    assert fused.keyword_items == (4,)
    assert len(fused.entity_spans) == 1
    # budget 4 fits w <GPE> Bonn </GPE>
    fused = fuse_templates(a, b, max_len=3 + 1 + 4)
    assert fused.items == ("<GPE>", "Paris", "</GPE>", FUSE, "w", "<GPE>", "Bonn", "</GPE>")
    assert len(fused.entity_spans) == 2


def test_fuse_zero_budget_keeps_a_only():
    a = template_of(["Paris"], [(0, 1, "GPE")], sid="a")
    b = template_of(["Bonn"], [(0, 1, "GPE")], sid="b")
    fused = fuse_templates(a, b, max_len=1)
    assert fused.items == ("<GPE>", "Paris", "</GPE>", FUSE)
    assert len(fused.entity_spans) == 1
    with pytest.raises(ValueError):
        fuse_templates(a, b, max_len=0)


def test_fused_template_still_delinearizes_when_masks_filled():
    a = template_of(["Paris", "visited"], [(0, 1, "GPE")], keywords=[1], sid="a")
    b = template_of(["Bonn", "left"], [(0, 1, "GPE")], sid="b")
    fused = fuse_templates(a, b)
    items = [("w" if item == MASK else item) for item in fused.items if item != FUSE]
    ann = delinearize(items, id="a#g0")
    assert sorted(s.label for s in ann.spans) == ["GPE", "GPE"]


def test_embedding_cache_round_trip():
    embeddings = [SentenceEmbedding("s1", (0.5, 0.25)), SentenceEmbedding("s2", (1.0, 0.0))]
    lines = list(embedding_cache_lines(embeddings))
    assert all(json.loads(line) for line in lines)
    assert parse_embedding_cache(lines) == embeddings


def test_retrieval_report_line_format():
    line = retrieval_report_line("s1", [("s2", 0.5), ("s3", 1 / 3)])
    assert line == '{"query_id":"s1","neighbors":[["s2",0.500000],["s3",0.333333]]}'
    record = json.loads(line)
    assert record["neighbors"][0] == ["s2", 0.5]

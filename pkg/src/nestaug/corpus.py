"""Nested-annotation data model, validation, corpus I/O, and corpus statistics.

A corpus is a list of sentences, each carrying a set of labeled token spans.
Spans may nest (one span fully inside another, or two spans sharing an extent
under different labels) but never cross.  The canonical on-disk format is
jsonl with a fixed key order; a human-friendly inline-bracket format exists
for fixtures.
"""

from __future__ import annotations

import io
import json
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Union

LABEL_RE = re.compile(r"[A-Z][A-Z0-9_]*\Z")

# Any surface shaped like a label sentinel is reserved regardless of the
# configured label set, so linearized text parses unambiguously.
RESERVED_TOKEN_RE = re.compile(r"</?[A-Z][A-Z0-9_]*>\Z")
RESERVED_FIXED = ("<mask>", "<fuse>")

DEFAULT_LABELS = ("PER", "ORG", "GPE", "FAC", "WEA", "LOC", "VEH")
DEFAULT_MAX_DEPTH = 3


class CorpusError(ValueError):
    """Base for all data-model violations; carries source location if known."""

    def __init__(self, message: str, *, sentence_id: str | None = None, line: int | None = None):
        self.bare_message = message
        self.sentence_id = sentence_id
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if sentence_id is not None:
            prefix += f"sentence {sentence_id!r}: "
        super().__init__(prefix + message)


class MalformedRecordError(CorpusError):
    """Record cannot be decoded into (id, tokens, spans) at all."""


class ReservedTokenError(CorpusError):
    """A token text collides with a reserved sentinel surface form."""


class UnknownLabelError(CorpusError):
    """A span label is outside the configured label set."""


class SpanOutOfRangeError(CorpusError):
    """Span indices fall outside the sentence."""


class DuplicateSpanError(CorpusError):
    """Two spans share the identical (start, end, label) triple."""


class CrossingSpanError(CorpusError):
    """Two spans overlap without containment."""


class DepthExceededError(CorpusError):
    """Some token is covered by more spans than max_depth allows."""


class DuplicateSentenceIdError(CorpusError):
    """Two sentences in one stream share an id."""


@dataclass(frozen=True)
class LabelSet:
    """The finite label inventory, fixed per run."""

    names: tuple[str, ...] = DEFAULT_LABELS

    def __post_init__(self):
        if not self.names:
            raise ValueError("label set must not be empty")
        seen = set()
        for name in self.names:
            if not LABEL_RE.match(name):
                raise ValueError(f"invalid label name {name!r}")
            if name in seen:
                raise ValueError(f"duplicate label {name!r}")
            seen.add(name)

    def __contains__(self, name: object) -> bool:
        return name in self.names

    def __iter__(self) -> Iterator[str]:
        return iter(self.names)

    def __len__(self) -> int:
        return len(self.names)

    @classmethod
    def parse(cls, spec: str) -> "LabelSet":
        return cls(tuple(part.strip() for part in spec.split(",") if part.strip()))


class Lexicon:
    """Token classifier: stopwords from a run-supplied list, punctuation by Unicode category."""

    def __init__(self, stopwords: Iterable[str] = ()):
        self.stopwords = frozenset(w.lower() for w in stopwords)

    @classmethod
    def from_file(cls, path) -> "Lexicon":
        """Load a stopword list: one lowercase word per line, blanks ignored."""
        with open(path, encoding="utf-8") as fh:
            return cls(line.strip() for line in fh if line.strip())

    @staticmethod
    def is_punct(text: str) -> bool:
        return bool(text) and all(unicodedata.category(ch).startswith("P") for ch in text)

    def is_stopword(self, text: str) -> bool:
        return text.lower() in self.stopwords

    def token(self, text: str, index: int) -> "Token":
        return Token(text=text, index=index, is_punct=self.is_punct(text), is_stopword=self.is_stopword(text))


@dataclass(frozen=True)
class Token:
    text: str
    index: int
    is_punct: bool = False
    is_stopword: bool = False


def is_reserved_surface(text: str) -> bool:
    return text in RESERVED_FIXED or bool(RESERVED_TOKEN_RE.match(text))


def _check_token_text(text: str, sentence_id: str | None = None) -> None:
    if not isinstance(text, str) or not text:
        raise MalformedRecordError("empty token text", sentence_id=sentence_id)
    if any(ch.isspace() for ch in text):
        raise MalformedRecordError(f"token {text!r} contains whitespace", sentence_id=sentence_id)
    if is_reserved_surface(text):
        raise ReservedTokenError(f"token {text!r} collides with a reserved sentinel", sentence_id=sentence_id)


@dataclass(frozen=True)
class Span:
    start: int  # token index, inclusive
    end: int    # token index, exclusive
    label: str

    def contains(self, other: "Span") -> bool:
        """Extent containment, equal extents included."""
        return self.start <= other.start and other.end <= self.end

    def crosses(self, other: "Span") -> bool:
        return (self.start < other.start < self.end < other.end
                or other.start < self.start < other.end < self.end)

    @property
    def length(self) -> int:
        return self.end - self.start


def canonical_spans(spans: Iterable[Span]) -> tuple[Span, ...]:
    """Deterministic span order: by start, outermost first, then label."""
    return tuple(sorted(spans, key=lambda s: (s.start, -s.end, s.label)))


@dataclass(frozen=True)
class NestedAnnotation:
    """One sentence with its (possibly nested) labeled spans.

    Immutable and validated on construction: token texts are well formed,
    span indices are in range, and no two spans cross.  Duplicate triples are
    caught in :meth:`create`, the factory all parsers go through.
    """

    id: str
    tokens: tuple[Token, ...]
    spans: frozenset[Span]

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise MalformedRecordError("sentence id must be a non-empty string")
        for pos, tok in enumerate(self.tokens):
            _check_token_text(tok.text, self.id)
            if tok.index != pos:
                raise MalformedRecordError(
                    f"token index {tok.index} at position {pos}", sentence_id=self.id)
        n = len(self.tokens)
        for span in self.spans:
            if not (0 <= span.start < span.end <= n):
                raise SpanOutOfRangeError(
                    f"span ({span.start},{span.end},{span.label}) out of range for {n} tokens",
                    sentence_id=self.id)
        ordered = canonical_spans(self.spans)
        for i, a in enumerate(ordered):
            for b in ordered[i + 1:]:
                if a.crosses(b):
                    raise CrossingSpanError(
                        f"spans ({a.start},{a.end},{a.label}) and ({b.start},{b.end},{b.label}) cross",
                        sentence_id=self.id)

    @classmethod
    def create(cls, id: str, tokens: Iterable[Token], spans: Iterable[Span]) -> "NestedAnnotation":
        spans = list(spans)
        seen: set[Span] = set()
        for span in spans:
            if span in seen:
                raise DuplicateSpanError(
                    f"duplicate span ({span.start},{span.end},{span.label})", sentence_id=id)
            seen.add(span)
        return cls(id=id, tokens=tuple(tokens), spans=frozenset(spans))

    def texts(self) -> tuple[str, ...]:
        return tuple(tok.text for tok in self.tokens)

    def sorted_spans(self) -> tuple[Span, ...]:
        return canonical_spans(self.spans)

    def entity_token_indices(self) -> frozenset[int]:
        covered: set[int] = set()
        for span in self.spans:
            covered.update(range(span.start, span.end))
        return frozenset(covered)

    def label_multiset(self) -> Counter:
        return Counter(span.label for span in self.spans)


def token_depths(annotation: NestedAnnotation) -> list[int]:
    """Number of spans covering each token position."""
    depths = [0] * len(annotation.tokens)
    for span in annotation.spans:
        for i in range(span.start, span.end):
            depths[i] += 1
    return depths


def check_depth(annotation: NestedAnnotation, max_depth: int | None = DEFAULT_MAX_DEPTH) -> None:
    """Reject annotations deeper than max_depth; None disables the check
    (analysis commands count over-deep corpora instead of rejecting them)."""
    if max_depth is None:
        return
    depths = token_depths(annotation)
    if depths and max(depths) > max_depth:
        worst = max(range(len(depths)), key=lambda i: depths[i])
        raise DepthExceededError(
            f"token {worst} has label depth {depths[worst]} > {max_depth}",
            sentence_id=annotation.id)


# ---------------------------------------------------------------------------
# Parsing and serialization
# ---------------------------------------------------------------------------

Stream = Union[IO, Iterable[str]]

FORMAT_JSONL = "jsonl"
FORMAT_BRACKET = "inline-bracket"
FORMATS = (FORMAT_JSONL, FORMAT_BRACKET)


def _iter_lines(stream: Stream) -> Iterator[str]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    elif isinstance(stream, (bytes, bytearray)):
        stream = io.TextIOWrapper(io.BytesIO(stream), encoding="utf-8")
    elif hasattr(stream, "read") and isinstance(stream.read(0), bytes):  # type: ignore[union-attr]
        stream = io.TextIOWrapper(stream, encoding="utf-8")
    for line in stream:  # type: ignore[union-attr]
        yield line.rstrip("\n").rstrip("\r")


def parse_corpus(stream: Stream, format: str = FORMAT_JSONL, *,
                 label_set: LabelSet | None = None,
                 lexicon: Lexicon | None = None,
                 max_depth: int | None = DEFAULT_MAX_DEPTH) -> list[NestedAnnotation]:
    """Parse a corpus stream, validating every invariant.

    Raises a :class:`CorpusError` subclass carrying the 1-based line number of
    the first offending record.
    """
    if format not in FORMATS:
        raise MalformedRecordError(f"unknown corpus format {format!r}")
    label_set = label_set or LabelSet()
    lexicon = lexicon or Lexicon()
    annotations: list[NestedAnnotation] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(_iter_lines(stream), start=1):
        if not line.strip():
            continue
        try:
            if format == FORMAT_JSONL:
                ann = _parse_jsonl_record(line, label_set, lexicon)
            else:
                ann = _parse_bracket_record(line, lineno, label_set, lexicon)
            check_depth(ann, max_depth)
        except CorpusError as exc:
            if exc.line is None:
                raise type(exc)(exc.bare_message, sentence_id=exc.sentence_id, line=lineno) from None
            raise
        if ann.id in seen_ids:
            raise DuplicateSentenceIdError(f"duplicate sentence id {ann.id!r}", line=lineno)
        seen_ids.add(ann.id)
        annotations.append(ann)
    return annotations


def _parse_jsonl_record(line: str, label_set: LabelSet, lexicon: Lexicon) -> NestedAnnotation:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(record, dict) or set(record) != {"id", "tokens", "spans"}:
        raise MalformedRecordError("record must be an object with exactly id, tokens, spans")
    sid = record["id"]
    if not isinstance(sid, str) or not sid:
        raise MalformedRecordError("id must be a non-empty string")
    raw_tokens = record["tokens"]
    if not isinstance(raw_tokens, list) or not all(isinstance(t, str) for t in raw_tokens):
        raise MalformedRecordError("tokens must be a list of strings", sentence_id=sid)
    tokens = [lexicon.token(text, i) for i, text in enumerate(raw_tokens)]
    raw_spans = record["spans"]
    if not isinstance(raw_spans, list):
        raise MalformedRecordError("spans must be a list", sentence_id=sid)
    spans = []
    for triple in raw_spans:
        if (not isinstance(triple, list) or len(triple) != 3
                or not isinstance(triple[0], int) or isinstance(triple[0], bool)
                or not isinstance(triple[1], int) or isinstance(triple[1], bool)
                or not isinstance(triple[2], str)):
            raise MalformedRecordError(f"span {triple!r} is not [start, end, label]", sentence_id=sid)
        start, end, label = triple
        _check_label(label, label_set, sid)
        spans.append(Span(start, end, label))
    return NestedAnnotation.create(sid, tokens, spans)


def _check_label(label: str, label_set: LabelSet, sentence_id: str | None) -> None:
    if not LABEL_RE.match(label):
        raise MalformedRecordError(f"malformed label {label!r}", sentence_id=sentence_id)
    if label not in label_set:
        raise UnknownLabelError(f"label {label!r} not in configured label set", sentence_id=sentence_id)


def _parse_bracket_record(line: str, lineno: int, label_set: LabelSet, lexicon: Lexicon) -> NestedAnnotation:
    if "\t" in line:
        sid, _, body = line.partition("\t")
        sid = sid.strip()
        if not sid:
            raise MalformedRecordError("empty id before tab")
    else:
        sid, body = f"s{lineno}", line
    tokens: list[Token] = []
    spans: list[Span] = []
    stack: list[tuple[str, int]] = []
    for part in body.split():
        if part == "]":
            if not stack:
                raise MalformedRecordError("unbalanced ']'", sentence_id=sid)
            label, start = stack.pop()
            if start == len(tokens):
                raise MalformedRecordError(f"empty [{label} ... ] span", sentence_id=sid)
            spans.append(Span(start, len(tokens), label))
        elif part.startswith("[") and len(part) > 1:
            label = part[1:]
            _check_label(label, label_set, sid)
            stack.append((label, len(tokens)))
        elif part == "[":
            raise MalformedRecordError("bare '[' without label", sentence_id=sid)
        else:
            tokens.append(lexicon.token(part, len(tokens)))
    if stack:
        raise MalformedRecordError(f"unclosed [{stack[-1][0]}", sentence_id=sid)
    return NestedAnnotation.create(sid, tokens, spans)


def write_corpus(annotations: Iterable[NestedAnnotation], format: str = FORMAT_JSONL) -> str:
    """Serialize a corpus deterministically (canonical key and span order)."""
    if format not in FORMATS:
        raise ValueError(f"unknown corpus format {format!r}")
    lines = []
    for ann in annotations:
        if format == FORMAT_JSONL:
            lines.append(jsonl_line(ann))
        else:
            lines.append(bracket_line(ann))
    return "".join(line + "\n" for line in lines)


def jsonl_line(annotation: NestedAnnotation) -> str:
    record = {
        "id": annotation.id,
        "tokens": list(annotation.texts()),
        "spans": [[s.start, s.end, s.label] for s in annotation.sorted_spans()],
    }
    return json.dumps(record, separators=(",", ":"), ensure_ascii=False)


def bracket_line(annotation: NestedAnnotation) -> str:
    for tok in annotation.tokens:
        if tok.text == "]" or tok.text.startswith("["):
            raise ValueError(
                f"token {tok.text!r} cannot be represented in the bracket format (use jsonl)")
    parts = []
    for kind, payload in iter_span_events(annotation):
        if kind == "open":
            parts.append(f"[{payload.label}")
        elif kind == "close":
            parts.append("]")
        else:
            parts.append(annotation.tokens[payload].text)
    return f"{annotation.id}\t{' '.join(parts)}"


def iter_span_events(annotation: NestedAnnotation) -> Iterator[tuple[str, object]]:
    """Walk the sentence emitting ("open", span) / ("close", span) / ("token", index).

    At a shared boundary longer spans open earlier and close later; spans of
    equal extent are ordered by label name ascending from the outside in.
    """
    opens_at: dict[int, list[Span]] = {}
    closes_at: dict[int, list[Span]] = {}
    for span in annotation.spans:
        opens_at.setdefault(span.start, []).append(span)
        closes_at.setdefault(span.end, []).append(span)
    for pos in range(len(annotation.tokens) + 1):
        for span in sorted(closes_at.get(pos, ()), key=lambda s: (s.start, s.label), reverse=True):
            yield ("close", span)
        for span in sorted(opens_at.get(pos, ()), key=lambda s: (-s.end, s.label)):
            yield ("open", span)
        if pos < len(annotation.tokens):
            yield ("token", pos)


def write_corpus_file(annotations: Iterable[NestedAnnotation], path, format: str = FORMAT_JSONL) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_corpus(annotations, format))


def read_corpus_file(path, format: str = FORMAT_JSONL, **kwargs) -> list[NestedAnnotation]:
    with open(path, "rb") as fh:
        return parse_corpus(fh, format, **kwargs)


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorpusStats:
    num_sentences: int
    num_nested_sentences: int
    num_entities: int
    num_nested_entities: int

    def __add__(self, other: "CorpusStats") -> "CorpusStats":
        return CorpusStats(
            self.num_sentences + other.num_sentences,
            self.num_nested_sentences + other.num_nested_sentences,
            self.num_entities + other.num_entities,
            self.num_nested_entities + other.num_nested_entities,
        )


def nested_spans(annotation: NestedAnnotation) -> set[Span]:
    """Spans contained in (or extent-equal, different label to) another span."""
    ordered = annotation.sorted_spans()
    inner: set[Span] = set()
    for b in ordered:
        for a in ordered:
            if a != b and a.contains(b):
                inner.add(b)
                break
    return inner


def corpus_stats(annotations: Iterable[NestedAnnotation]) -> CorpusStats:
    num_s = num_ns = num_e = num_ne = 0
    for ann in annotations:
        num_s += 1
        num_e += len(ann.spans)
        inner = nested_spans(ann)
        num_ne += len(inner)
        if inner:
            num_ns += 1
    return CorpusStats(num_s, num_ns, num_e, num_ne)


class CorrelationMatrix:
    """Counts of (outside label, inside label) over all nested span pairs.

    Every ordered pair of distinct spans where the second's extent lies inside
    the first's is counted, including equal extents under different labels.
    """

    def __init__(self, labels: LabelSet, counts: Counter | None = None):
        self.labels = labels
        self.counts: Counter = Counter(counts or ())

    def get(self, outside: str, inside: str) -> int:
        return self.counts.get((outside, inside), 0)

    def total(self) -> int:
        return sum(self.counts.values())

    def rows(self) -> list[tuple[str, list[int]]]:
        """One row per inside label, columns in label-set order (outside)."""
        return [(inside, [self.get(outside, inside) for outside in self.labels])
                for inside in self.labels]

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, CorrelationMatrix)
                and self.labels == other.labels and self.counts == other.counts)


def label_correlation(annotations: Iterable[NestedAnnotation],
                      label_set: LabelSet | None = None) -> CorrelationMatrix:
    label_set = label_set or LabelSet()
    counts: Counter = Counter()
    for ann in annotations:
        ordered = ann.sorted_spans()
        for outer in ordered:
            for inner in ordered:
                if outer != inner and outer.contains(inner):
                    counts[(outer.label, inner.label)] += 1
    return CorrelationMatrix(label_set, counts)


def bio_encode(annotation: NestedAnnotation, layer: str = "outermost") -> list[str]:
    """Encode the outermost span layer as BIO tags, one per token.

    Outermost spans are those not strictly contained in any other span; when
    two outermost spans share an extent, the lexicographically smallest label
    wins (one tag per token).
    """
    if layer != "outermost":
        raise ValueError(f"unsupported BIO layer {layer!r}")
    ordered = annotation.sorted_spans()
    maximal = [b for b in ordered
               if not any(a != b and a.contains(b) and (a.start, a.end) != (b.start, b.end)
                          for a in ordered)]
    by_extent: dict[tuple[int, int], Span] = {}
    for span in maximal:
        key = (span.start, span.end)
        if key not in by_extent or span.label < by_extent[key].label:
            by_extent[key] = span
    tags = ["O"] * len(annotation.tokens)
    for span in by_extent.values():
        tags[span.start] = f"B-{span.label}"
        for i in range(span.start + 1, span.end):
            tags[i] = f"I-{span.label}"
    return tags

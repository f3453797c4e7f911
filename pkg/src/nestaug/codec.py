"""Linearization codec: nested annotations to flat item sequences and back.

A linearized sequence interleaves sentence tokens with label sentinels, e.g.

    <FAC> The <GPE> Chinese </GPE> embassy </FAC> in France

Longer spans open earlier and close later; spans of equal extent are opened
in label order from the outside in, so every annotation has exactly one
linearization and the codec round-trips exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .corpus import (
    DEFAULT_MAX_DEPTH,
    CorpusError,
    Lexicon,
    LabelSet,
    NestedAnnotation,
    Span,
    check_depth,
    iter_span_events,
    _check_label,
)

OPEN_RE = re.compile(r"<([A-Z][A-Z0-9_]*)>\Z")
CLOSE_RE = re.compile(r"</([A-Z][A-Z0-9_]*)>\Z")
MASK = "<mask>"
FUSE = "<fuse>"


class DelinearizeError(CorpusError):
    """Base for sequences that do not decode to a valid annotation."""


class UnbalancedSentinelError(DelinearizeError):
    """A close sentinel with no matching open, or an open left unclosed."""


class MismatchedSentinelError(DelinearizeError):
    """Close sentinel label differs from the innermost open one."""


class EmptySpanError(DelinearizeError):
    """An open sentinel closed again with no tokens in between."""


class StraySentinelError(DelinearizeError):
    """A placeholder sentinel (mask or fuse marker) in a final sequence."""


def open_sentinel(label: str) -> str:
    return f"<{label}>"


def close_sentinel(label: str) -> str:
    return f"</{label}>"


def sentinel_kind(item: str) -> tuple[str, str | None] | None:
    """Classify an item: ("open", label), ("close", label), ("mask", None),
    ("fuse", None), or None for plain text."""
    if item == MASK:
        return ("mask", None)
    if item == FUSE:
        return ("fuse", None)
    m = CLOSE_RE.match(item)
    if m:
        return ("close", m.group(1))
    m = OPEN_RE.match(item)
    if m:
        return ("open", m.group(1))
    return None


def strip_sentinels(items: Iterable[str]) -> list[str]:
    """Drop every sentinel, keeping only text tokens."""
    return [item for item in items if sentinel_kind(item) is None]


@dataclass(frozen=True)
class LinearizedSequence:
    id: str
    items: tuple[str, ...]

    def text(self) -> str:
        return " ".join(self.items)


def linearize(annotation: NestedAnnotation) -> LinearizedSequence:
    items: list[str] = []
    for kind, payload in iter_span_events(annotation):
        if kind == "open":
            items.append(open_sentinel(payload.label))
        elif kind == "close":
            items.append(close_sentinel(payload.label))
        else:
            items.append(annotation.tokens[payload].text)
    return LinearizedSequence(id=annotation.id, items=tuple(items))


def sequence_line(sequence: LinearizedSequence) -> str:
    """One sequence as `id<TAB>space-joined items` (the template file format)."""
    return f"{sequence.id}\t{' '.join(sequence.items)}"


def parse_sequence_lines(lines: Iterable[str]) -> list[LinearizedSequence]:
    sequences = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        if "\t" not in line:
            raise CorpusError("expected id<TAB>items", line=lineno)
        sid, _, body = line.partition("\t")
        if not sid.strip():
            raise CorpusError("empty sequence id", line=lineno)
        sequences.append(LinearizedSequence(sid.strip(), tuple(body.split())))
    return sequences


def delinearize(items: Iterable[str], *, id: str,
                label_set: LabelSet | None = None,
                lexicon: Lexicon | None = None,
                max_depth: int | None = DEFAULT_MAX_DEPTH) -> NestedAnnotation:
    """Decode a linearized item sequence back into a nested annotation.

    One pass with a sentinel stack; raises a :class:`DelinearizeError` (or
    another :class:`CorpusError` for data-model violations such as duplicate
    spans or excessive depth) if the sequence is not well formed.
    """
    label_set = label_set or LabelSet()
    lexicon = lexicon or Lexicon()
    tokens = []
    spans: list[Span] = []
    stack: list[tuple[str, int]] = []
    for item in items:
        kind = sentinel_kind(item)
        if kind is None:
            tokens.append(lexicon.token(item, len(tokens)))
        elif kind[0] == "open":
            _check_label(kind[1], label_set, id)
            stack.append((kind[1], len(tokens)))
        elif kind[0] == "close":
            if not stack:
                raise UnbalancedSentinelError(f"close {item} with no open span", sentence_id=id)
            label, start = stack.pop()
            if label != kind[1]:
                raise MismatchedSentinelError(
                    f"close {item} against open <{label}>", sentence_id=id)
            if start == len(tokens):
                raise EmptySpanError(f"span <{label}> closed with no tokens", sentence_id=id)
            spans.append(Span(start, len(tokens), label))
        else:
            raise StraySentinelError(f"placeholder {item} in final sequence", sentence_id=id)
    if stack:
        raise UnbalancedSentinelError(f"unclosed <{stack[-1][0]}>", sentence_id=id)
    annotation = NestedAnnotation.create(id, tokens, spans)
    check_depth(annotation, max_depth)
    return annotation

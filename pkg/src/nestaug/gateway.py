"""Model gateway: four capabilities behind one interface.

Capabilities: attention maps, sentence embeddings, mask filling, and sentence
scoring.  Each has a deterministic built-in statistical backend (n-gram
language model, corpus co-occurrence attention, TF-IDF embeddings) and an
external worker client speaking newline-delimited JSON over a subprocess's
standard input/output:

    request:  {"id": <int>, "cap": "fill|score|embed|attention", "tokens": [...]}
    response: {"id": <int>, "result": ...} or {"id": <int>, "error": "..."}

Workers must answer {"id":0,"cap":"ping"} with {"id":0,"result":"pong"} at
startup.  Responses may arrive out of order; they are re-matched by id.
Malformed lines and per-request failures are logged and surfaced as errors on
the affected request only, never killing the batch.
"""

from __future__ import annotations

import json
import logging
import math
import os
import select
import shlex
import subprocess
import threading
import time
from collections import Counter
from dataclasses import dataclass
from itertools import count
from typing import Iterable, Sequence

from .codec import MASK, LinearizedSequence, sentinel_kind, strip_sentinels
from .corpus import NestedAnnotation, is_reserved_surface
from .retrieval import TfidfEmbedder
from .templates import Template

log = logging.getLogger(__name__)

CAPABILITIES = ("attention", "embed", "fill", "score")

MAX_MASK_EXPANSION = 3
EXPANSION_CONTINUE_P = 0.5


class GatewayError(RuntimeError):
    """A backend failed to produce a usable result."""


class WorkerError(GatewayError):
    """Base for external-worker failures; carries the request id if known."""

    def __init__(self, message: str, request_id: int | None = None):
        self.request_id = request_id
        if request_id is not None:
            message = f"request {request_id}: {message}"
        super().__init__(message)


class WorkerTimeoutError(WorkerError):
    pass


class WorkerExitError(WorkerError):
    pass


class WorkerResponseError(WorkerError):
    """The worker answered with an error payload."""


# ---------------------------------------------------------------------------
# Built-in statistical models
# ---------------------------------------------------------------------------

def _token_lists(corpus: Iterable) -> list[list[str]]:
    sentences = []
    for entry in corpus:
        if isinstance(entry, NestedAnnotation):
            sentences.append(list(entry.texts()))
        else:
            sentences.append([str(t) for t in entry])
    return sentences


class NgramModel:
    """Laplace-smoothed unigram/bigram model over corpus tokens.

    P(w) = (c(w)+a) / (C+aV); P(w|prev) = (c(prev,w)+a) / (c(prev,.)+aV)
    where c(prev,.) is the number of bigrams starting at prev.  The
    vocabulary never contains sentinel surface forms.
    """

    def __init__(self, unigram: Counter, bigram: Counter, alpha: float = 1.0):
        if alpha <= 0:
            raise ValueError(f"smoothing constant must be positive, got {alpha}")
        self.unigram = unigram
        self.bigram = bigram
        self.alpha = alpha
        self.vocab: tuple[str, ...] = tuple(sorted(unigram))
        self.total = sum(unigram.values())
        self.context_totals: Counter = Counter()
        for (prev, _), n in bigram.items():
            self.context_totals[prev] += n

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def log_prob(self, token: str, prev: str | None = None) -> float:
        v = self.vocab_size
        if prev is None:
            return math.log((self.unigram.get(token, 0) + self.alpha)
                            / (self.total + self.alpha * v))
        return math.log((self.bigram.get((prev, token), 0) + self.alpha)
                        / (self.context_totals.get(prev, 0) + self.alpha * v))

    def score(self, tokens: Sequence[str]) -> float:
        """Mean per-token log-probability (chain of bigrams, unigram start)."""
        if not tokens:
            raise ValueError("cannot score an empty token list")
        total = self.log_prob(tokens[0])
        for prev, tok in zip(tokens, tokens[1:]):
            total += self.log_prob(tok, prev)
        return total / len(tokens)

    def sample_next(self, prev: str | None, rng) -> str:
        """Draw one token from the smoothed distribution (bigram given prev,
        unigram otherwise) by cumulative walk over the sorted vocabulary."""
        if not self.vocab:
            raise ValueError("empty vocabulary")
        v = self.vocab_size
        if prev is None:
            denom = self.total + self.alpha * v
            weight = lambda w: self.unigram.get(w, 0) + self.alpha
        else:
            denom = self.context_totals.get(prev, 0) + self.alpha * v
            weight = lambda w: self.bigram.get((prev, w), 0) + self.alpha
        target = rng.random() * denom
        acc = 0.0
        for w in self.vocab:
            acc += weight(w)
            if target < acc:
                return w
        return self.vocab[-1]  # float round-off on the last step


def train_ngram(corpus: Iterable, alpha: float = 1.0) -> NgramModel:
    """Count exact unigram/bigram frequencies over the corpus sentences."""
    unigram: Counter = Counter()
    bigram: Counter = Counter()
    seen = False
    for tokens in _token_lists(corpus):
        seen = True
        tokens = [t for t in tokens if not is_reserved_surface(t)]
        unigram.update(tokens)
        bigram.update(zip(tokens, tokens[1:]))
    if not seen:
        raise ValueError("cannot train on an empty corpus")
    return NgramModel(unigram, bigram, alpha)


class CooccurrenceAttention:
    """Stand-in attention: token-to-token corpus co-occurrence, row-normalized.

    attention[i][j] is proportional to alpha plus the number of ordered
    position pairs across corpus sentences where token i's text co-occurs
    with token j's text in one sentence.
    """

    def __init__(self, corpus: Iterable, alpha: float = 1.0):
        if alpha <= 0:
            raise ValueError(f"smoothing constant must be positive, got {alpha}")
        self.alpha = alpha
        self.counts: Counter = Counter()
        for tokens in _token_lists(corpus):
            for p, x in enumerate(tokens):
                for q, y in enumerate(tokens):
                    if p != q:
                        self.counts[(x, y)] += 1

    def attention(self, tokens: Sequence[str]) -> list[list[float]]:
        n = len(tokens)
        rows = []
        for x in tokens:
            weights = [self.counts.get((x, y), 0) + self.alpha for y in tokens]
            denom = sum(weights)
            rows.append([w / denom for w in weights])
        return rows if n else []


# ---------------------------------------------------------------------------
# Built-in backends (capability adapters around the models)
# ---------------------------------------------------------------------------

class BuiltinFill:
    def __init__(self, model: NgramModel):
        self.model = model

    def fill(self, items: Sequence[str], rng, slot: int = 0) -> list[str]:
        """Replace each mask with 1..3 sampled tokens.

        Expansion length is geometric (continue at p=0.5) capped at 3.  The
        first token conditions on the nearest preceding text item (sentinels
        are invisible to the model); later tokens chain on the output.
        """
        out: list[str] = []
        last_text: str | None = None
        for item in items:
            if item == MASK:
                length = 1
                while length < MAX_MASK_EXPANSION and rng.random() < EXPANSION_CONTINUE_P:
                    length += 1
                prev = last_text
                for _ in range(length):
                    tok = self.model.sample_next(prev, rng)
                    out.append(tok)
                    prev = tok
                    last_text = tok
            else:
                out.append(item)
                if sentinel_kind(item) is None:
                    last_text = item
        return out


class BuiltinScore:
    def __init__(self, model: NgramModel):
        self.model = model

    def score(self, tokens: Sequence[str], slot: int = 0) -> float:
        return self.model.score(tokens)


class BuiltinEmbed:
    def __init__(self, embedder: TfidfEmbedder):
        self.embedder = embedder

    def embed(self, tokens: Sequence[str], slot: int = 0) -> list[float]:
        return list(self.embedder.embed(tokens))


class BuiltinAttention:
    def __init__(self, model: CooccurrenceAttention):
        self.model = model

    def attention(self, tokens: Sequence[str], slot: int = 0) -> list[list[float]]:
        return self.model.attention(tokens)


# ---------------------------------------------------------------------------
# External worker client
# ---------------------------------------------------------------------------

DEFAULT_WORKER_TIMEOUT = 30.0

_READ_CHUNK = 65536


@dataclass(frozen=True)
class WorkerSpec:
    command: tuple[str, ...]
    timeout: float = DEFAULT_WORKER_TIMEOUT

    @classmethod
    def parse(cls, command_line: str, timeout: float = DEFAULT_WORKER_TIMEOUT) -> "WorkerSpec":
        argv = tuple(shlex.split(command_line))
        if not argv:
            raise ValueError("empty worker command")
        return cls(argv, timeout)


class WorkerClient:
    """One worker subprocess: line-delimited JSON requests over its stdio.

    submit()/result() are split so many requests can be in flight; responses
    arriving out of order are parked until their id is asked for.  Request
    ids are unique across all clients in the process.
    """

    _ids = count(1)

    def __init__(self, spec: WorkerSpec):
        self.spec = spec
        try:
            self._proc = subprocess.Popen(
                list(spec.command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                bufsize=0)
        except OSError as exc:
            raise WorkerExitError(f"cannot start worker {spec.command!r}: {exc}") from None
        self._buf = b""
        self._pending: set[int] = set()
        self._arrived: dict[int, dict] = {}
        self._lock = threading.Lock()
        self._handshake()

    def _handshake(self) -> None:
        self._write({"id": 0, "cap": "ping"})
        self._pending.add(0)
        try:
            reply = self._collect(0)
        except WorkerError as exc:
            self.close()
            raise WorkerExitError(f"worker handshake failed: {exc}") from None
        if reply.get("result") != "pong":
            self.close()
            raise WorkerExitError(f"worker handshake returned {reply!r}")

    def _write(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False) + "\n"
        try:
            self._proc.stdin.write(line.encode("utf-8"))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise WorkerExitError(f"worker pipe closed: {exc}", record.get("id")) from None

    def submit(self, cap: str, tokens: Sequence) -> int:
        request_id = next(self._ids)
        self._write({"id": request_id, "cap": cap, "tokens": list(tokens)})
        self._pending.add(request_id)
        return request_id

    def result(self, request_id: int):
        """Block until the response for request_id arrives; raise on failure."""
        reply = self._collect(request_id)
        if "error" in reply:
            raise WorkerResponseError(str(reply["error"]), request_id)
        return reply["result"]

    def call(self, cap: str, tokens: Sequence):
        """One full round trip; safe to use from several threads at once.

        submit()/result() themselves are single-thread primitives (the split
        exists so one thread can keep many requests in flight)."""
        with self._lock:
            return self.result(self.submit(cap, tokens))

    def _collect(self, request_id: int) -> dict:
        deadline = time.monotonic() + self.spec.timeout
        while True:
            if request_id in self._arrived:
                self._pending.discard(request_id)
                return self._arrived.pop(request_id)
            line = self._read_line(deadline, request_id)
            if not line.strip():
                continue
            try:
                msg = json.loads(line)
            except json.JSONDecodeError:
                log.warning("worker sent a malformed line (skipped): %.120r", line)
                continue
            if not isinstance(msg, dict) or not isinstance(msg.get("id"), int):
                log.warning("worker response without integer id (skipped): %.120r", line)
                continue
            if msg["id"] not in self._pending:
                log.warning("worker response for unknown request %s (skipped)", msg["id"])
                continue
            if ("result" in msg) == ("error" in msg):
                log.warning("worker response must carry exactly one of result/error (skipped): %.120r", line)
                continue
            self._arrived[msg["id"]] = msg

    def _read_line(self, deadline: float, request_id: int) -> str:
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise WorkerTimeoutError(
                    f"no response within {self.spec.timeout:.0f}s", request_id)
            ready, _, _ = select.select([self._proc.stdout], [], [], remaining)
            if not ready:
                raise WorkerTimeoutError(
                    f"no response within {self.spec.timeout:.0f}s", request_id)
            chunk = self._proc.stdout.read(_READ_CHUNK)
            if not chunk:
                raise WorkerExitError("worker closed its output", request_id)
            self._buf += chunk
        line, _, self._buf = self._buf.partition(b"\n")
        return line.decode("utf-8", errors="replace")

    def close(self) -> None:
        for stream in (self._proc.stdin, self._proc.stdout):
            try:
                if stream:
                    stream.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()

    def __enter__(self) -> "WorkerClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class WorkerPool:
    """A fixed set of worker clients; tasks pick a client by slot number, so
    the mapping is deterministic and independent of timing."""

    def __init__(self, spec: WorkerSpec, size: int = 1):
        if size < 1:
            raise ValueError("pool size must be >= 1")
        self.clients = []
        try:
            for _ in range(size):
                self.clients.append(WorkerClient(spec))
        except WorkerError:
            self.close()
            raise

    def client(self, slot: int) -> WorkerClient:
        return self.clients[slot % len(self.clients)]

    def close(self) -> None:
        for client in self.clients:
            client.close()


class WorkerFill:
    def __init__(self, pool: WorkerPool):
        self.pool = pool

    def fill(self, items: Sequence[str], rng, slot: int = 0) -> list[str]:
        result = self.pool.client(slot).call("fill", items)
        if not isinstance(result, list) or not all(isinstance(t, str) for t in result):
            raise WorkerResponseError(f"fill result must be a token list, got {type(result).__name__}")
        return result


class WorkerScore:
    def __init__(self, pool: WorkerPool):
        self.pool = pool

    def score(self, tokens: Sequence[str], slot: int = 0) -> float:
        result = self.pool.client(slot).call("score", tokens)
        if not isinstance(result, (int, float)) or isinstance(result, bool) or not math.isfinite(result):
            raise WorkerResponseError(f"score result must be a finite number, got {result!r}")
        return float(result)


class WorkerEmbed:
    def __init__(self, pool: WorkerPool):
        self.pool = pool

    def embed(self, tokens: Sequence[str], slot: int = 0) -> list[float]:
        result = self.pool.client(slot).call("embed", tokens)
        if (not isinstance(result, list) or not result
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in result)):
            raise WorkerResponseError("embed result must be a non-empty numeric vector")
        return [float(v) for v in result]


class WorkerAttention:
    def __init__(self, pool: WorkerPool):
        self.pool = pool

    def attention(self, tokens: Sequence[str], slot: int = 0) -> list[list[float]]:
        result = self.pool.client(slot).call("attention", tokens)
        n = len(tokens)
        if (not isinstance(result, list) or len(result) != n
                or not all(isinstance(row, list) and len(row) == n for row in result)):
            raise WorkerResponseError(f"attention result must be a {n}x{n} matrix")
        rows = []
        for row in result:
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0 for v in row):
                raise WorkerResponseError("attention weights must be non-negative numbers")
            rows.append([float(v) for v in row])
        return rows


# ---------------------------------------------------------------------------
# Gateway facade and template-level operations
# ---------------------------------------------------------------------------

class Gateway:
    """One object exposing all four capabilities, each independently backed
    by a built-in model or a worker pool."""

    def __init__(self, *, fill, score, embed, attention, pools: Sequence[WorkerPool] = ()):
        self._fill = fill
        self._score = score
        self._embed = embed
        self._attention = attention
        self._pools = list(pools)

    def fill(self, items: Sequence[str], rng, slot: int = 0) -> list[str]:
        return self._fill.fill(items, rng, slot=slot)

    def score(self, tokens: Sequence[str], slot: int = 0) -> float:
        return self._score.score(tokens, slot=slot)

    def embed(self, tokens: Sequence[str], slot: int = 0) -> list[float]:
        return self._embed.embed(tokens, slot=slot)

    def attention(self, tokens: Sequence[str], slot: int = 0) -> list[list[float]]:
        return self._attention.attention(tokens, slot=slot)

    def close(self) -> None:
        for pool in self._pools:
            pool.close()

    def __enter__(self) -> "Gateway":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def build_builtin_gateway(corpus: Sequence[NestedAnnotation], alpha: float = 1.0) -> Gateway:
    """All four capabilities from corpus-trained statistical models."""
    model = train_ngram(corpus, alpha)
    embedder = TfidfEmbedder.fit(ann.texts() for ann in corpus)
    attention = CooccurrenceAttention(corpus, alpha)
    return Gateway(fill=BuiltinFill(model), score=BuiltinScore(model),
                   embed=BuiltinEmbed(embedder), attention=BuiltinAttention(attention))


def fill_template(template: Template, backend, rng, *,
                  sequence_id: str | None = None, slot: int = 0) -> LinearizedSequence:
    """Fill every mask in a template and validate the structural contract:
    no mask survives and the sentinel sequence is exactly the template's."""
    filled = backend.fill(template.items, rng, slot=slot)
    if any(item == MASK for item in filled):
        raise GatewayError(f"backend left mask placeholders in {template.source_id}")
    wanted = [it for it in template.items if sentinel_kind(it) is not None and it != MASK]
    got = [it for it in filled if sentinel_kind(it) is not None]
    if wanted != got:
        raise GatewayError(
            f"backend altered sentinel structure of {template.source_id}: {wanted} -> {got}")
    return LinearizedSequence(id=sequence_id or template.source_id, items=tuple(filled))


def score_sentence(tokens: Sequence[str], backend, slot: int = 0) -> float:
    """Mean per-token log-probability of a sentinel-stripped sentence."""
    if not tokens:
        raise ValueError("cannot score an empty sentence")
    return float(backend.score(tokens, slot=slot))


def pll_tokens(sequence: LinearizedSequence) -> list[str]:
    """The tokens a fluency score should see: text only, no sentinels."""
    return strip_sentinels(sequence.items)


def worker_command_from_env(env_var: str = "NESTAUG_WORKER") -> WorkerSpec | None:
    command_line = os.environ.get(env_var, "").strip()
    if not command_line:
        return None
    return WorkerSpec.parse(command_line)

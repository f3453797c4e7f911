"""Run configuration and deterministic seeding.

A run is described by a declarative key = value file; command-line flags
override file keys.  The resolved configuration is serializable so a run can
be reproduced from its output directory alone.
"""

from __future__ import annotations

import hashlib
import os
import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import DEFAULT_MAX_DEPTH, LabelSet
from .gateway import DEFAULT_WORKER_TIMEOUT, WorkerSpec

WORKER_ENV_VAR = "NESTAUG_WORKER"

BACKEND_BUILTIN = "builtin"
BACKEND_WORKER = "worker"


class ConfigError(ValueError):
    """Invalid configuration file or flag value."""


def derive_rng(seed: int, *parts) -> random.Random:
    """A random stream keyed by (seed, *parts).

    Streams are independent of iteration order and worker-pool size: the
    same (seed, sentence id, purpose, index) key always yields the same
    stream, so outputs cannot depend on scheduling.
    """
    key = ":".join([str(seed), *(str(p) for p in parts)])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


@dataclass(frozen=True)
class BackendChoice:
    kind: str  # builtin | worker
    command: str | None = None  # worker command line, if pinned per capability

    def __post_init__(self):
        if self.kind not in (BACKEND_BUILTIN, BACKEND_WORKER):
            raise ConfigError(f"backend must be builtin or worker, got {self.kind!r}")
        if self.kind == BACKEND_BUILTIN and self.command:
            raise ConfigError("builtin backend takes no command")

    @classmethod
    def parse(cls, value: str) -> "BackendChoice":
        value = value.strip()
        if value == BACKEND_BUILTIN:
            return cls(BACKEND_BUILTIN)
        if value == BACKEND_WORKER:
            return cls(BACKEND_WORKER)
        if value.startswith(BACKEND_WORKER + ":"):
            command = value[len(BACKEND_WORKER) + 1:].strip()
            if not command:
                raise ConfigError("worker backend with empty command")
            return cls(BACKEND_WORKER, command)
        raise ConfigError(f"backend must be builtin, worker, or worker:<command>, got {value!r}")

    def render(self) -> str:
        if self.command:
            return f"{self.kind}:{self.command}"
        return self.kind


_BUILTIN = BackendChoice(BACKEND_BUILTIN)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    labels: LabelSet = field(default_factory=LabelSet)
    max_depth: int = DEFAULT_MAX_DEPTH
    keyword_ratio: float = 0.3
    base_mask_rate: float = 0.3
    fusion_mask_rate: float = 0.3
    top_n: int = 1
    silver_rate: float = 0.70
    max_len: int = 256
    pool: int = 1
    smoothing: float = 1.0
    worker_timeout: float = DEFAULT_WORKER_TIMEOUT
    fill_backend: BackendChoice = _BUILTIN
    score_backend: BackendChoice = _BUILTIN
    embed_backend: BackendChoice = _BUILTIN
    attention_backend: BackendChoice = _BUILTIN
    worker_command: str | None = None
    stopwords_path: str | None = None
    corpus_path: str | None = None
    out_dir: str | None = None

    def __post_init__(self):
        for name in ("keyword_ratio", "base_mask_rate", "fusion_mask_rate", "silver_rate"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        if self.keyword_ratio == 0:
            raise ConfigError("keyword_ratio must be positive")
        if self.silver_rate == 0:
            raise ConfigError("silver_rate must be positive")
        for name, minimum in (("max_depth", 1), ("top_n", 1), ("max_len", 1), ("pool", 1)):
            if getattr(self, name) < minimum:
                raise ConfigError(f"{name} must be >= {minimum}, got {getattr(self, name)}")
        if self.smoothing <= 0:
            raise ConfigError(f"smoothing must be positive, got {self.smoothing}")
        if self.worker_timeout <= 0:
            raise ConfigError(f"worker_timeout must be positive, got {self.worker_timeout}")
        if self.corpus_path and self.out_dir:
            corpus = Path(self.corpus_path).resolve()
            out = Path(self.out_dir).resolve()
            if corpus == out or out in corpus.parents:
                raise ConfigError("input corpus must not live inside the output directory")

    def worker_spec(self, choice: BackendChoice) -> WorkerSpec:
        """Resolve the command for a worker-backed capability.

        The environment variable wins over any configured command, so a
        different worker can be swapped in without touching the run file.
        """
        command = (os.environ.get(WORKER_ENV_VAR, "").strip()
                   or choice.command or self.worker_command)
        if not command:
            raise ConfigError(
                f"a worker backend needs a command: set {WORKER_ENV_VAR}, "
                f"the worker key, or worker:<command>")
        return WorkerSpec.parse(command, self.worker_timeout)


_INT_KEYS = ("seed", "max_depth", "top_n", "max_len", "pool")
_FLOAT_KEYS = ("keyword_ratio", "base_mask_rate", "fusion_mask_rate",
               "silver_rate", "smoothing", "worker_timeout")
_BACKEND_KEYS = ("fill_backend", "score_backend", "embed_backend", "attention_backend")
_PATH_KEYS = {"stopwords": "stopwords_path", "corpus": "corpus_path", "out_dir": "out_dir"}

CONFIG_KEYS = (_INT_KEYS + _FLOAT_KEYS + _BACKEND_KEYS
               + ("labels", "worker") + tuple(_PATH_KEYS))


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """key = value lines; blank lines and # comments ignored."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in mapping:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        mapping[key] = value
    return mapping


def load_config_file(path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    return parse_config_text(text, source=str(path))


def config_from_mapping(mapping: dict[str, str]) -> RunConfig:
    """Build a validated RunConfig from string key/values."""
    kwargs: dict = {}
    for key, value in mapping.items():
        try:
            if key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key in _BACKEND_KEYS:
                kwargs[key] = BackendChoice.parse(value)
            elif key == "labels":
                kwargs["labels"] = LabelSet.parse(value)
            elif key == "worker":
                kwargs["worker_command"] = value or None
            elif key in _PATH_KEYS:
                kwargs[_PATH_KEYS[key]] = value or None
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    return RunConfig(**kwargs)


def render_config(cfg: RunConfig) -> str:
    """The resolved run as a loadable key = value file."""
    lines = [
        f"seed = {cfg.seed}",
        f"labels = {','.join(cfg.labels)}",
        f"max_depth = {cfg.max_depth}",
        f"keyword_ratio = {cfg.keyword_ratio}",
        f"base_mask_rate = {cfg.base_mask_rate}",
        f"fusion_mask_rate = {cfg.fusion_mask_rate}",
        f"top_n = {cfg.top_n}",
        f"silver_rate = {cfg.silver_rate}",
        f"max_len = {cfg.max_len}",
        f"pool = {cfg.pool}",
        f"smoothing = {cfg.smoothing}",
        f"worker_timeout = {cfg.worker_timeout}",
        f"fill_backend = {cfg.fill_backend.render()}",
        f"score_backend = {cfg.score_backend.render()}",
        f"embed_backend = {cfg.embed_backend.render()}",
        f"attention_backend = {cfg.attention_backend.render()}",
    ]
    if cfg.worker_command:
        lines.append(f"worker = {cfg.worker_command}")
    if cfg.stopwords_path:
        lines.append(f"stopwords = {cfg.stopwords_path}")
    if cfg.corpus_path:
        lines.append(f"corpus = {cfg.corpus_path}")
    if cfg.out_dir:
        lines.append(f"out_dir = {cfg.out_dir}")
    return "\n".join(lines) + "\n"

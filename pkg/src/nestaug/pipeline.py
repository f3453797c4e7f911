"""End-to-end corpus augmentation.

For every sentence: retrieve its most similar other sentences, mask both
templates dynamically, fuse them, have a generator fill the masks, then keep
only generated samples whose labels survived intact, ranked by fluency.
The kept silver samples are appended to the golden corpus.

Every random choice draws from a stream keyed by (seed, sentence id,
purpose, generation index), and results are reduced in corpus order, so
output bytes are identical regardless of worker-pool size or scheduling.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .codec import MASK, LinearizedSequence, sequence_line
from .config import BACKEND_BUILTIN, ConfigError, RunConfig, derive_rng, render_config
from .corpus import (
    CorpusError,
    CorpusStats,
    Lexicon,
    NestedAnnotation,
    corpus_stats,
    read_corpus_file,
    write_corpus_file,
)
from .filtering import (
    AugmentedSample,
    FilterConfig,
    classify_against_labels,
    depth_prefilter,
    merge_aug_golden,
    rank_and_select,
    sample_report_line,
)
from .gateway import (
    BuiltinAttention,
    BuiltinEmbed,
    BuiltinFill,
    BuiltinScore,
    CAPABILITIES,
    CooccurrenceAttention,
    Gateway,
    GatewayError,
    WorkerAttention,
    WorkerEmbed,
    WorkerFill,
    WorkerPool,
    WorkerScore,
    fill_template,
    pll_tokens,
    score_sentence,
    train_ngram,
)
from .metrics import render_stats_text, stats_report_rows
from .retrieval import (
    SentenceEmbedding,
    TfidfEmbedder,
    embedding_cache_lines,
    fuse_templates,
    retrieval_report_line,
    top_n_similar,
)
from .templates import GaussianMaskConfig, Template, build_template, dynamic_mask, select_keywords

log = logging.getLogger(__name__)

_WORKER_WRAPPERS = {
    "fill": WorkerFill,
    "score": WorkerScore,
    "embed": WorkerEmbed,
    "attention": WorkerAttention,
}


def build_gateway(cfg: RunConfig, corpus: Sequence[NestedAnnotation],
                  capabilities: Sequence[str] = CAPABILITIES) -> Gateway:
    """Wire each requested capability to its configured backend.

    Built-in models train once on the corpus; worker-backed capabilities
    sharing one command line share one pool of cfg.pool processes.
    """
    pools: dict = {}
    ngram = None

    def shared_ngram():
        nonlocal ngram
        if ngram is None:
            ngram = train_ngram(corpus, cfg.smoothing)
        return ngram

    builtin_factories: dict[str, Callable] = {
        "fill": lambda: BuiltinFill(shared_ngram()),
        "score": lambda: BuiltinScore(shared_ngram()),
        "embed": lambda: BuiltinEmbed(TfidfEmbedder.fit(ann.texts() for ann in corpus)),
        "attention": lambda: BuiltinAttention(CooccurrenceAttention(corpus, cfg.smoothing)),
    }
    backends: dict[str, object | None] = {}
    try:
        for cap in CAPABILITIES:
            if cap not in capabilities:
                backends[cap] = None
                continue
            choice = getattr(cfg, f"{cap}_backend")
            if choice.kind == BACKEND_BUILTIN:
                backends[cap] = builtin_factories[cap]()
            else:
                spec = cfg.worker_spec(choice)
                if spec not in pools:
                    pools[spec] = WorkerPool(spec, cfg.pool)
                backends[cap] = _WORKER_WRAPPERS[cap](pools[spec])
    except Exception:
        for pool in pools.values():
            pool.close()
        raise
    return Gateway(fill=backends["fill"], score=backends["score"],
                   embed=backends["embed"], attention=backends["attention"],
                   pools=list(pools.values()))


@dataclass
class AugmentResult:
    golden: list[NestedAnnotation]
    removed_ids: list[str]
    embeddings: list[SentenceEmbedding]
    neighbors: dict[str, list[tuple[str, float]]]
    templates: list[tuple[str, str, Template]]  # (sample id, neighbor id, fused)
    samples: list[AugmentedSample]              # generation order
    kept: list[AugmentedSample]                 # rank order
    silver: list[NestedAnnotation]              # kept, ids prefixed
    merged: list[NestedAnnotation]              # golden ++ silver
    golden_stats: CorpusStats
    silver_stats: CorpusStats

    def kept_ids(self) -> set[str]:
        return {sample.generated.id for sample in self.kept}


def _parallel_map(func: Callable, items: Sequence, pool: int) -> list:
    """Order-preserving map, threaded when a pool is requested."""
    if pool <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=pool) as executor:
        return list(executor.map(func, items))


def load_golden(cfg: RunConfig) -> tuple[list[NestedAnnotation], list[str], Lexicon]:
    if not cfg.corpus_path:
        raise ConfigError("no input corpus configured (corpus = <path>)")
    lexicon = Lexicon.from_file(cfg.stopwords_path) if cfg.stopwords_path else Lexicon()
    raw = read_corpus_file(cfg.corpus_path, label_set=cfg.labels,
                           lexicon=lexicon, max_depth=None)
    golden, removed = depth_prefilter(raw, cfg.max_depth)
    if removed:
        log.info("depth prefilter removed %d sentence(s): %s",
                 len(removed), ", ".join(removed[:5]) + ("..." if len(removed) > 5 else ""))
    if not golden:
        raise CorpusError("corpus is empty after the depth prefilter")
    return golden, removed, lexicon


def run_augment(cfg: RunConfig) -> AugmentResult:
    golden, removed, lexicon = load_golden(cfg)
    gateway = build_gateway(cfg, golden)
    try:
        return _augment(cfg, golden, removed, lexicon, gateway)
    finally:
        gateway.close()


def _augment(cfg: RunConfig, golden: list[NestedAnnotation], removed: list[str],
             lexicon: Lexicon, gateway: Gateway) -> AugmentResult:
    mask_cfg = GaussianMaskConfig(cfg.base_mask_rate)
    fuse_mask_cfg = GaussianMaskConfig(cfg.fusion_mask_rate)

    def prepare(task: tuple[int, NestedAnnotation]):
        index, ann = task
        try:
            vector = gateway.embed(ann.texts(), slot=index)
            attn = gateway.attention(ann.texts(), slot=index)
        except GatewayError as exc:
            log.warning("sentence %s skipped (backend failure): %s", ann.id, exc)
            return index, None, None
        keywords = select_keywords(ann, attn, cfg.keyword_ratio)
        return index, SentenceEmbedding(ann.id, tuple(vector)), build_template(ann, keywords)

    prepared = _parallel_map(prepare, list(enumerate(golden)), cfg.pool)
    embeddings = [emb for _, emb, _ in prepared if emb is not None]
    bases = {emb.sentence_id: base for _, emb, base in prepared if emb is not None}

    neighbors: dict[str, list[tuple[str, float]]] = {}
    if len(embeddings) > 1:
        for emb in embeddings:
            neighbors[emb.sentence_id] = top_n_similar(emb.sentence_id, embeddings, cfg.top_n)

    def generate(task: tuple[int, NestedAnnotation]):
        index, ann = task
        samples: list[AugmentedSample] = []
        fused_templates: list[tuple[str, str, Template]] = []
        for k, (neighbor_id, _) in enumerate(neighbors.get(ann.id, [])):
            sample_id = f"{ann.id}#g{k}"
            try:
                masked_a = dynamic_mask(bases[ann.id], mask_cfg,
                                        derive_rng(cfg.seed, ann.id, "mask", k))
                masked_b = dynamic_mask(bases[neighbor_id], fuse_mask_cfg,
                                        derive_rng(cfg.seed, ann.id, "fuse-mask", k))
                fused = fuse_templates(masked_a, masked_b, cfg.max_len)
                generated = fill_template(fused, gateway,
                                          derive_rng(cfg.seed, ann.id, "fill", k),
                                          sequence_id=sample_id, slot=index)
                sample = classify_against_labels(
                    generated, fused.label_multiset(), source_id=ann.id,
                    label_set=cfg.labels, lexicon=lexicon, max_depth=cfg.max_depth)
                if sample.is_silver:
                    tokens = pll_tokens(generated)
                    if not tokens:
                        log.warning("sample %s has no text tokens, dropped", sample_id)
                        continue
                    sample = sample.scored(score_sentence(tokens, gateway, slot=index))
            except GatewayError as exc:
                log.warning("sample %s skipped (backend failure): %s", sample_id, exc)
                continue
            fused_templates.append((sample_id, neighbor_id, fused))
            samples.append(sample)
        return index, samples, fused_templates

    generated = _parallel_map(generate, list(enumerate(golden)), cfg.pool)
    all_samples = [sample for _, samples, _ in generated for sample in samples]
    all_templates = [entry for _, _, entries in generated for entry in entries]

    kept = rank_and_select(all_samples, FilterConfig(cfg.silver_rate))
    merged = merge_aug_golden(golden, kept)
    silver = merged[len(golden):]
    return AugmentResult(
        golden=golden, removed_ids=removed, embeddings=embeddings,
        neighbors=neighbors, templates=all_templates, samples=all_samples,
        kept=kept, silver=silver, merged=merged,
        golden_stats=corpus_stats(golden), silver_stats=corpus_stats(silver),
    )


def write_augment_outputs(result: AugmentResult, out_dir, cfg: RunConfig,
                          render_figures: bool = True) -> dict[str, Path]:
    """Write every artifact of a run; returns {name: path}."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    def write_lines(name: str, lines) -> None:
        path = out / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line + "\n")
        paths[name] = path

    write_corpus_file(result.silver, out / "silver.jsonl")
    paths["silver.jsonl"] = out / "silver.jsonl"
    write_corpus_file(result.merged, out / "aug_golden.jsonl")
    paths["aug_golden.jsonl"] = out / "aug_golden.jsonl"

    kept_ids = result.kept_ids()
    write_lines("samples.jsonl",
                (sample_report_line(s, s.generated.id in kept_ids) for s in result.samples))
    write_lines("retrieval.jsonl",
                (retrieval_report_line(sid, result.neighbors[sid])
                 for sid in sorted(result.neighbors)))
    write_lines("embeddings.jsonl", embedding_cache_lines(result.embeddings))
    write_lines("templates.tsv",
                (sequence_line(LinearizedSequence(sid, fused.items))
                 for sid, _, fused in result.templates))
    write_lines("templates_meta.jsonl",
                (_template_meta_line(sid, neighbor_id, fused)
                 for sid, neighbor_id, fused in result.templates))
    write_lines("stats.jsonl", stats_report_rows(
        [("golden", result.golden_stats), ("silver", result.silver_stats)]))

    run_conf = out / "run.conf"
    run_conf.write_text(render_config(cfg), encoding="utf-8")
    paths["run.conf"] = run_conf

    if render_figures:
        from . import figures  # lazy: pulls in matplotlib
        kept_plls = [s.pll for s in result.kept]
        dropped_plls = [s.pll for s in result.samples
                        if s.is_silver and s.generated.id not in kept_ids]
        paths["silver_pll.png"] = figures.pll_figure(kept_plls, dropped_plls,
                                                     out / "silver_pll.png")
        paths["stats.png"] = figures.stats_figure(
            [("golden", result.golden_stats), ("silver", result.silver_stats)],
            out / "stats.png")
    return paths


def _template_meta_line(sample_id: str, neighbor_id: str, fused: Template) -> str:
    record = {
        "id": sample_id,
        "source_id": fused.source_id,
        "neighbor_id": neighbor_id,
        "keywords": list(fused.keyword_items),
        "masks": [pos for pos, item in enumerate(fused.items) if item == MASK],
    }
    return json.dumps(record, separators=(",", ":"), ensure_ascii=False)


def summary_text(result: AugmentResult) -> str:
    silver_count = sum(1 for s in result.samples if s.is_silver)
    lines = []
    if result.removed_ids:
        lines.append(f"depth prefilter removed {len(result.removed_ids)} sentence(s)")
    lines.append(f"generated {len(result.samples)} sample(s): "
                 f"{silver_count} silver, {len(result.samples) - silver_count} none-silver, "
                 f"{len(result.kept)} kept")
    lines.append(render_stats_text([("golden", result.golden_stats),
                                    ("silver", result.silver_stats)]))
    return "\n".join(lines)

"""Corpus augmentation toolkit for nested named-entity recognition.

The toolkit linearizes nested entity annotations into sentinel-bracketed
sequences, builds masked keyword templates, fuses similar sentences'
templates, fills the masks with pluggable generators, and keeps only
generated samples whose labels survive intact, ranked by fluency.
"""

from .codec import (
    FUSE,
    MASK,
    DelinearizeError,
    LinearizedSequence,
    delinearize,
    linearize,
    strip_sentinels,
)
from .config import ConfigError, RunConfig, config_from_mapping, derive_rng
from .corpus import (
    CorpusError,
    CorpusStats,
    CorrelationMatrix,
    LabelSet,
    Lexicon,
    NestedAnnotation,
    Span,
    Token,
    bio_encode,
    corpus_stats,
    label_correlation,
    parse_corpus,
    write_corpus,
)
from .filtering import (
    AugmentedSample,
    FilterConfig,
    classify_silver,
    depth_prefilter,
    merge_aug_golden,
    rank_and_select,
)
from .gateway import (
    Gateway,
    GatewayError,
    NgramModel,
    WorkerClient,
    WorkerError,
    WorkerSpec,
    fill_template,
    score_sentence,
    train_ngram,
)
from .metrics import PRF, EvalResult, span_prf
from .pipeline import AugmentResult, build_gateway, run_augment
from .retrieval import (
    SentenceEmbedding,
    TfidfEmbedder,
    fuse_templates,
    similarity,
    top_n_similar,
)
from .templates import (
    GaussianMaskConfig,
    KeywordSet,
    Template,
    build_template,
    dynamic_mask,
    sample_mask_rate,
    select_keywords,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentResult",
    "AugmentedSample",
    "ConfigError",
    "CorpusError",
    "CorpusStats",
    "CorrelationMatrix",
    "DelinearizeError",
    "EvalResult",
    "FUSE",
    "FilterConfig",
    "Gateway",
    "GatewayError",
    "GaussianMaskConfig",
    "KeywordSet",
    "LabelSet",
    "Lexicon",
    "LinearizedSequence",
    "MASK",
    "NestedAnnotation",
    "NgramModel",
    "PRF",
    "RunConfig",
    "SentenceEmbedding",
    "Span",
    "Template",
    "TfidfEmbedder",
    "Token",
    "WorkerClient",
    "WorkerError",
    "WorkerSpec",
    "bio_encode",
    "build_gateway",
    "build_template",
    "classify_silver",
    "config_from_mapping",
    "corpus_stats",
    "delinearize",
    "depth_prefilter",
    "derive_rng",
    "dynamic_mask",
    "fill_template",
    "fuse_templates",
    "label_correlation",
    "linearize",
    "merge_aug_golden",
    "parse_corpus",
    "rank_and_select",
    "run_augment",
    "sample_mask_rate",
    "score_sentence",
    "select_keywords",
    "similarity",
    "span_prf",
    "strip_sentinels",
    "top_n_similar",
    "train_ngram",
    "write_corpus",
]

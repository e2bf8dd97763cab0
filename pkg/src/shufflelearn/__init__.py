"""Deterministic word-order perturbation and learnability analysis.

Pipeline: clean a corpus, shuffle it deterministically per sentence
length with a Mallows-model permutation table, tokenize with byte-level
BPE, measure n-gram surprisal per variant, and relate the surprisal
curves to vocabulary-structure predictors with PLS regression.
"""

from .bpe import ByteLevelBPE
from .corpus import Corpus, preprocess, split
from .mallows import (
    MallowsDistribution,
    analytic_moments,
    kendall_tau,
    log_partition,
)
from .ngram import (
    KneserNeyLM,
    SurprisalResult,
    UniformLM,
    delta_surprisal,
    ingest_external,
    surprisal,
)
from .pls import PLS2Regression, correlation_matrix, loo_cv, select_components
from .shuffling import (
    MallowsShuffler,
    PermutationManifest,
    apply_shuffle,
    build_manifest,
    invert_shuffle,
)
from .sweep import ExperimentConfig, ResultStore, pls_report, report, run_sweep
from .vocab_stats import (
    CoverageCurve,
    VocabStatsRecord,
    coverage_curve,
    coverage_integral,
    coverage_similarity,
    stats_record,
)

__version__ = "0.1.0"

__all__ = [
    "ByteLevelBPE",
    "Corpus",
    "CoverageCurve",
    "ExperimentConfig",
    "KneserNeyLM",
    "MallowsDistribution",
    "MallowsShuffler",
    "PLS2Regression",
    "PermutationManifest",
    "ResultStore",
    "SurprisalResult",
    "UniformLM",
    "VocabStatsRecord",
    "analytic_moments",
    "apply_shuffle",
    "build_manifest",
    "correlation_matrix",
    "coverage_curve",
    "coverage_integral",
    "coverage_similarity",
    "delta_surprisal",
    "ingest_external",
    "invert_shuffle",
    "kendall_tau",
    "log_partition",
    "loo_cv",
    "pls_report",
    "preprocess",
    "report",
    "run_sweep",
    "select_components",
    "split",
    "stats_record",
    "surprisal",
]

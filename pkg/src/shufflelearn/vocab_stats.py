"""Vocabulary-structure metrics: coverage curves and the nine predictors.

Coverage C(r) is the cumulative percentage of corpus tokens accounted
for by the r most frequent types. Frequency ties are broken by first
occurrence in the corpus, and the curve clamps at 100 beyond the type
count so large rank limits stay usable on small corpora.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .errors import DataError

DEFAULT_R_MAX = 100_000


@dataclass(frozen=True)
class CoverageCurve:
    """Cumulative token coverage per frequency rank for one unit type."""

    unit: str  # "word" or "subword"
    coverage: np.ndarray  # percent at ranks 1..n_types, non-decreasing

    @property
    def n_types(self) -> int:
        return len(self.coverage)

    def value(self, r: int) -> float:
        if r < 1:
            raise ValueError("rank must be >= 1")
        if r > self.n_types:
            return 100.0
        return float(self.coverage[r - 1])

    def values(self, ranks: np.ndarray) -> np.ndarray:
        ranks = np.asarray(ranks, dtype=np.int64)
        if (ranks < 1).any():
            raise ValueError("ranks must be >= 1")
        clipped = np.minimum(ranks, self.n_types) - 1
        out = self.coverage[clipped].astype(float)
        out[ranks > self.n_types] = 100.0
        return out


def _ranked_counts(units_per_sentence) -> np.ndarray:
    """Frequency counts sorted descending, ties by first occurrence."""
    counts: dict = {}
    for units in units_per_sentence:
        for u in units:
            counts[u] = counts.get(u, 0) + 1
    if not counts:
        raise DataError("empty corpus")
    # dict preserves first-occurrence order; stable sort keeps it for ties
    return np.array(sorted(counts.values(), key=lambda c: -c), dtype=np.int64)


def _sentence_units(corpus: Corpus, unit: str, tokenizer=None):
    if unit == "word":
        return corpus.sentences
    if unit == "subword":
        if tokenizer is None:
            raise ValueError("subword unit requires a tokenizer")
        return [tokenizer.encode(text) for text in corpus.texts()]
    raise ValueError(f"unknown unit {unit!r}")


def coverage_curve(corpus: Corpus, unit: str = "word", tokenizer=None) -> CoverageCurve:
    """Rank-frequency coverage curve over words or subword tokens."""
    if len(corpus) == 0:
        raise DataError("empty corpus")
    counts = _ranked_counts(_sentence_units(corpus, unit, tokenizer))
    coverage = 100.0 * np.cumsum(counts) / counts.sum()
    return CoverageCurve(unit, coverage)


def coverage_integral(curve: CoverageCurve, r_max: int = DEFAULT_R_MAX) -> float:
    """Area under the coverage curve per log-rank up to r_max.

    The step curve (constant on [r, r+1)) is integrated analytically per
    log-segment: (1/log r_max) * sum_r C(r) (log(r+1) - log(r)).
    """
    if r_max < 2:
        raise ValueError("r_max must be >= 2")
    ranks = np.arange(1, r_max, dtype=np.int64)
    widths = np.log(ranks + 1) - np.log(ranks)
    return float((curve.values(ranks) * widths).sum() / math.log(r_max))


def coverage_similarity(
    word_curve: CoverageCurve, subword_curve: CoverageCurve, r_max: int = DEFAULT_R_MAX
) -> float:
    """No-intercept log-weighted regression slope of subword on word coverage.

    m = sum_r log(r) C_w(r) C_s(r) / sum_r log(r) C_w(r)^2 over integer
    ranks 1..r_max (rank 1 has zero weight).
    """
    ranks = np.arange(1, r_max + 1, dtype=np.int64)
    weights = np.log(ranks)
    cw = word_curve.values(ranks)
    cs = subword_curve.values(ranks)
    denom = float((weights * cw * cw).sum())
    if denom == 0.0:
        raise DataError("degenerate all-zero word coverage curve")
    return float((weights * cw * cs).sum()) / denom


@dataclass(frozen=True)
class VocabStatsRecord:
    """The nine vocabulary predictors for one language variant."""

    c_w_100: float
    c_s_100: float
    coverage_similarity: float
    coverage_integral: float
    subwords_per_sentence: float
    words_per_sentence: float
    fertility: float
    word_length: float
    types: int

    # column order used in CSV output
    FIELDS = (
        "c_w_100",
        "c_s_100",
        "coverage_similarity",
        "coverage_integral",
        "subwords_per_sentence",
        "words_per_sentence",
        "fertility",
        "word_length",
        "types",
    )

    def as_row(self) -> list:
        return [getattr(self, f) for f in self.FIELDS]

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.FIELDS}


def stats_record(corpus: Corpus, tokenizer, r_max: int = DEFAULT_R_MAX) -> VocabStatsRecord:
    """Compute all nine predictors for one (language, variant) corpus.

    Word length is averaged over word tokens (not types); fertility is
    total subword tokens over total word tokens.
    """
    if len(corpus) == 0:
        raise DataError("empty corpus")
    word_curve = coverage_curve(corpus, "word")
    sub_curve = coverage_curve(corpus, "subword", tokenizer)

    n_sentences = len(corpus)
    total_words = sum(len(s) for s in corpus.sentences)
    total_chars = sum(len(w) for s in corpus.sentences for w in s)
    total_subwords = sum(len(tokenizer.encode(t)) for t in corpus.texts())
    n_types = len({w for s in corpus.sentences for w in s})

    return VocabStatsRecord(
        c_w_100=word_curve.value(100),
        c_s_100=sub_curve.value(100),
        coverage_similarity=coverage_similarity(word_curve, sub_curve, r_max),
        coverage_integral=coverage_integral(word_curve, r_max),
        subwords_per_sentence=total_subwords / n_sentences,
        words_per_sentence=total_words / n_sentences,
        fertility=total_subwords / total_words,
        word_length=total_chars / total_words,
        types=n_types,
    )

"""N-gram surprisal proxy: interpolated Kneser-Ney model and aggregation.

Surprisal is the mean negative log-probability per token, in nats.
Sentence boundaries reset the context: each sentence is scored as its
tokens followed by the end-of-text token, with the context padded by
the padding token at the start.

The model's predictive distribution sums to one over the full token-id
range for every context: the unigram base interpolates with the uniform
distribution so unseen ids keep positive probability.
"""

from __future__ import annotations

import csv
import math
import statistics
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .bpe import EOT_ID, PAD_ID
from .errors import DataError

ORIGINAL = "original"

INGEST_HEADER = ["variant", "theta", "seed", "sentence_id", "position", "token_id", "logprob"]


@dataclass
class SurprisalResult:
    """Mean surprisal of one language variant, with provenance."""

    theta: object  # float or "original"
    seed: int
    S: float  # nats per token
    N: int
    delta_S: float | None = None
    per_sentence: list[float] | None = None
    variant: str = ""

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.S < 0:
            raise ValueError("surprisal must be non-negative")


class UniformLM:
    """Uniform distribution over a fixed token-id range."""

    def __init__(self, vocab_size: int):
        self.vocab_size = vocab_size
        self.order = 1

    def log_prob(self, context, token: int) -> float:
        if not 0 <= token < self.vocab_size:
            raise DataError(f"token id {token} outside vocabulary")
        return -math.log(self.vocab_size)


class KneserNeyLM:
    """Interpolated Kneser-Ney n-gram model over token ids.

    The highest order uses raw counts; lower orders use continuation
    counts. A context with zero count backs off entirely to the next
    lower order, so every context has a proper distribution.
    """

    def __init__(self, order: int = 4, discount: float = 0.75, vocab_size: int | None = None):
        self.order = order
        self.discount = discount
        self.vocab_size = vocab_size

    def get_params(self, deep: bool = True) -> dict:
        return {"order": self.order, "discount": self.discount, "vocab_size": self.vocab_size}

    def set_params(self, **params) -> "KneserNeyLM":
        for key, value in params.items():
            if key not in self.get_params():
                raise ValueError(f"invalid parameter {key!r}")
            setattr(self, key, value)
        return self

    def _padded(self, seq) -> list[int]:
        return [PAD_ID] * (self.order - 1) + list(seq) + [EOT_ID]

    def fit(self, sequences, y=None) -> "KneserNeyLM":
        """Count n-grams over padded sequences and derive KN tables."""
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must be in (0, 1)")
        if self.vocab_size is None:
            raise ValueError("vocab_size must be set before fitting")
        n = self.order

        # raw counts at the highest order
        top: Counter[tuple] = Counter()
        total_tokens = 0
        for seq in sequences:
            padded = self._padded(seq)
            total_tokens += len(padded) - (n - 1)
            for i in range(n - 1, len(padded)):
                top[tuple(padded[i - n + 1 : i + 1])] += 1
        if total_tokens == 0:
            raise DataError("empty training stream")

        # counts_[k]: k-gram -> count (raw at top level, continuation below)
        self.counts_: list[dict] = [dict() for _ in range(n + 1)]
        self.counts_[n] = dict(top)
        for k in range(n - 1, 0, -1):
            cont: Counter[tuple] = Counter()
            for gram in self.counts_[k + 1]:
                cont[gram[1:]] += 1
            self.counts_[k] = dict(cont)

        # per-level context totals and distinct-continuation counts
        self.context_total_: list[dict] = [dict() for _ in range(n + 1)]
        self.context_distinct_: list[dict] = [dict() for _ in range(n + 1)]
        for k in range(1, n + 1):
            totals: dict = {}
            distinct: dict = {}
            for gram, c in self.counts_[k].items():
                ctx = gram[:-1]
                totals[ctx] = totals.get(ctx, 0) + c
                distinct[ctx] = distinct.get(ctx, 0) + 1
            self.context_total_[k] = totals
            self.context_distinct_[k] = distinct
        return self

    def _check_fitted(self):
        if not hasattr(self, "counts_"):
            raise RuntimeError("KneserNeyLM is not fitted; call fit() first")

    def _prob(self, context: tuple, token: int, k: int) -> float:
        d = self.discount
        if k == 1:
            total = self.context_total_[1].get((), 0)
            types = self.context_distinct_[1].get((), 0)
            c = self.counts_[1].get((token,), 0)
            uniform = 1.0 / self.vocab_size
            if total == 0:
                return uniform
            return max(c - d, 0.0) / total + (d * types / total) * uniform
        ctx = context[-(k - 1):]
        total = self.context_total_[k].get(ctx, 0)
        if total == 0:
            return self._prob(context, token, k - 1)
        c = self.counts_[k].get(ctx + (token,), 0)
        distinct = self.context_distinct_[k].get(ctx, 0)
        backoff = self._prob(context, token, k - 1)
        return max(c - d, 0.0) / total + (d * distinct / total) * backoff

    def prob(self, context, token: int) -> float:
        """p(token | context); context is truncated to order - 1 ids."""
        self._check_fitted()
        token = int(token)
        if not 0 <= token < self.vocab_size:
            raise DataError(f"token id {token} outside vocabulary")
        ctx = tuple(int(t) for t in context)[-(self.order - 1):] if self.order > 1 else ()
        return self._prob(ctx, token, self.order)

    def log_prob(self, context, token: int) -> float:
        return math.log(self.prob(context, token))


def train_lm(sequences, order: int = 4, discount: float = 0.75, vocab_size: int | None = None):
    return KneserNeyLM(order=order, discount=discount, vocab_size=vocab_size).fit(sequences)


def surprisal(
    lm,
    test_sequences,
    theta=ORIGINAL,
    seed: int = 0,
    variant: str = "",
    keep_per_sentence: bool = False,
    records_path=None,
) -> SurprisalResult:
    """Score sentence-bounded sequences: S = mean(-log p) over tokens.

    Each sequence is scored as tokens + end-of-text with a padded start
    context. ``records_path`` optionally writes per-token log-prob
    records in the external ingest format.
    """
    order = getattr(lm, "order", 1)
    total = 0.0
    count = 0
    per_sentence = [] if keep_per_sentence else None
    writer = None
    fh = None
    if records_path is not None:
        fh = open(records_path, "w", encoding="utf-8", newline="")
        writer = csv.writer(fh)
        writer.writerow(INGEST_HEADER)
    try:
        for sid, seq in enumerate(test_sequences):
            tokens = list(seq) + [EOT_ID]
            context = [PAD_ID] * (order - 1)
            sent_total = 0.0
            for pos, token in enumerate(tokens):
                lp = lm.log_prob(context, token)
                sent_total -= lp
                count += 1
                if writer is not None:
                    writer.writerow([variant, theta, seed, sid, pos, token, repr(lp)])
                context.append(token)
            total += sent_total
            if per_sentence is not None:
                per_sentence.append(sent_total / len(tokens))
    finally:
        if fh is not None:
            fh.close()
    if count == 0:
        raise DataError("no tokens to score")
    return SurprisalResult(
        theta=theta, seed=seed, S=total / count, N=count,
        per_sentence=per_sentence, variant=variant,
    )


@dataclass
class DeltaCurve:
    """Median and interquartile range of delta-S per theta across seeds."""

    thetas: list
    median: list[float]
    q25: list[float]
    q75: list[float]
    per_seed: dict = field(default_factory=dict)  # (theta, seed) -> delta_S


def delta_surprisal(results, baselines) -> DeltaCurve:
    """Delta S(theta) = S(theta) - S_orig, matched per seed.

    ``baselines`` holds the original-order results; a single result is
    accepted and reused for every seed.
    """
    if isinstance(baselines, SurprisalResult):
        baselines = [baselines]
    base_by_seed = {b.seed: b.S for b in baselines}
    if not base_by_seed:
        raise DataError("no baseline (original-order) surprisal available")
    per_seed: dict = {}
    for res in results:
        if res.seed in base_by_seed:
            s_orig = base_by_seed[res.seed]
        elif len(base_by_seed) == 1:
            s_orig = next(iter(base_by_seed.values()))
        else:
            raise DataError(f"missing baseline for seed {res.seed}")
        per_seed[(res.theta, res.seed)] = res.S - s_orig

    thetas = sorted(
        {t for t, _ in per_seed},
        key=lambda t: (0, float(t)) if t != ORIGINAL else (1, 0.0),
    )
    median, q25, q75 = [], [], []
    for t in thetas:
        vals = sorted(v for (tt, _), v in per_seed.items() if tt == t)
        median.append(statistics.median(vals))
        q25.append(float(np.quantile(vals, 0.25)))
        q75.append(float(np.quantile(vals, 0.75)))
    return DeltaCurve(thetas, median, q25, q75, per_seed)


def surprisal_asymmetry(curve: DeltaCurve) -> float:
    """Median over positive theta of delta_S(+theta) - delta_S(-theta)."""
    lookup = dict(zip(curve.thetas, curve.median))
    diffs = [
        lookup[t] - lookup[-t]
        for t in curve.thetas
        if t != ORIGINAL and float(t) > 0 and -t in lookup
    ]
    if not diffs:
        raise DataError("no matched +theta/-theta pairs")
    return statistics.median(diffs)


def _parse_theta(text: str):
    return ORIGINAL if text == ORIGINAL else float(text)


def ingest_external(path) -> list[SurprisalResult]:
    """Aggregate per-token log-prob records into surprisal results.

    The file is CSV with header ``variant,theta,seed,sentence_id,
    position,token_id,logprob`` where logprob is the natural-log
    probability of the token. Results are grouped by (variant, theta,
    seed). Malformed records raise with their line number.
    """
    groups: dict[tuple, list[float]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty ingest file") from None
        if header != INGEST_HEADER:
            raise DataError(f"{path}: bad header {header!r}, expected {INGEST_HEADER!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(INGEST_HEADER):
                raise DataError(f"{path}:{lineno}: expected {len(INGEST_HEADER)} fields, got {len(row)}")
            try:
                variant = row[0]
                theta = _parse_theta(row[1])
                seed = int(row[2])
                int(row[3]), int(row[4]), int(row[5])
                logprob = float(row[6])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if logprob > 0:
                raise DataError(f"{path}:{lineno}: logprob must be <= 0, got {logprob}")
            groups.setdefault((variant, theta, seed), []).append(logprob)
    if not groups:
        raise DataError(f"{path}: no records")
    results = []
    for (variant, theta, seed), logprobs in sorted(groups.items(), key=lambda kv: str(kv[0])):
        results.append(
            SurprisalResult(
                theta=theta, seed=seed,
                S=-sum(logprobs) / len(logprobs), N=len(logprobs), variant=variant,
            )
        )
    return results

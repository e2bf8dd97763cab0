"""Experiment orchestration: theta/vocab sweeps, result store, reports.

The result store is an append-only newline-delimited JSON log keyed by
the full cell tuple (language, theta, seed, vocab size), which makes
reruns idempotent and crash-safe. Reports aggregate the store into
figure-ready CSV tables (median and interquartile range across seeds).
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pls as pls_mod
from .bpe import ByteLevelBPE
from .corpus import Corpus, split
from .errors import DataError
from .ngram import ORIGINAL, KneserNeyLM, surprisal
from .shuffling import PermutationManifest, apply_shuffle
from .vocab_stats import VocabStatsRecord, stats_record

DEFAULT_VOCAB_SIZES = [258, 1000, 8000, 16000, 32000, 64000]


def default_theta_grid(n_points: int = 28, bound: float = 9.0) -> list:
    """Symmetric, roughly log-spaced theta grid over [-bound, bound] plus 0.

    Used when the configuration does not enumerate its own grid.
    """
    half = (n_points - 1) // 2
    # log-spaced magnitudes from bound/100 up to bound
    mags = np.geomspace(bound / 100.0, bound, half)
    grid = sorted({round(float(v), 6) for v in np.concatenate([-mags, [0.0], mags])})
    return grid


@dataclass
class ExperimentConfig:
    """Settings for one sweep: corpus, grid, seeds, model parameters."""

    language: str = "und"
    corpus: str = ""
    thetas: list = field(default_factory=lambda: [ORIGINAL, 0.0])
    granularity: str = "word"
    seeds: list = field(default_factory=lambda: [0])
    vocab_sizes: list = field(default_factory=lambda: [16000])
    train_size: int = 650_000
    valid_size: int = 5_000
    test_size: int = 5_000
    split_seed: int = 0
    max_len: int = 80
    min_frequency: int = 2
    lm_order: int = 4
    lm_discount: float = 0.75
    r_max: int = 100_000
    store: str = "results.ndjson"
    out_dir: str = "."

    def __post_init__(self):
        if not self.thetas:
            raise DataError("theta grid must be non-empty")
        if not self.seeds:
            raise DataError("seed list must be non-empty")

    _INT_KEYS = {"train_size", "valid_size", "test_size", "split_seed", "max_len",
                 "min_frequency", "lm_order", "r_max"}
    _FLOAT_KEYS = {"lm_discount"}
    _LIST_KEYS = {"thetas", "seeds", "vocab_sizes"}

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """Parse a plain-text ``key = value`` config file.

        Lists are comma-separated; ``original`` is a valid theta. Lines
        starting with ``#`` are comments.
        """
        values: dict = {}
        known = set(cls.__dataclass_fields__)
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{lineno}: expected 'key = value'")
                key, _, raw = line.partition("=")
                key, raw = key.strip(), raw.strip()
                if key not in known:
                    raise DataError(f"{path}:{lineno}: unknown key {key!r}")
                if key in cls._LIST_KEYS:
                    items = [item.strip() for item in raw.split(",") if item.strip()]
                    if key == "thetas":
                        values[key] = [i if i == ORIGINAL else float(i) for i in items]
                    elif key == "seeds":
                        values[key] = [int(i) for i in items]
                    else:
                        values[key] = [int(i) for i in items]
                elif key in cls._INT_KEYS:
                    values[key] = int(raw)
                elif key in cls._FLOAT_KEYS:
                    values[key] = float(raw)
                else:
                    values[key] = raw
        return cls(**values)


def _theta_label(theta) -> str:
    return ORIGINAL if theta in (ORIGINAL, None) else repr(float(theta))


def cell_key(language: str, theta, seed: int, vocab_size: int) -> str:
    return f"{language}|{_theta_label(theta)}|{seed}|{vocab_size}"


class ResultStore:
    """Append-only NDJSON log with unique keys."""

    def __init__(self, path):
        self.path = Path(path)
        self._keys: set[str] = set()
        self._rows: list[dict] = []
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    row = json.loads(line)
                    self._rows.append(row)
                    self._keys.add(row["key"])

    def __contains__(self, key: str) -> bool:
        return key in self._keys

    def rows(self, kind: str | None = None) -> list[dict]:
        if kind is None:
            return list(self._rows)
        return [r for r in self._rows if r.get("kind") == kind]

    def append(self, row: dict) -> None:
        if row["key"] in self._keys:
            raise DataError(f"duplicate store key {row['key']!r}")
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
            fh.flush()
        self._rows.append(row)
        self._keys.add(row["key"])


def _sequences(corpus: Corpus, manifest: PermutationManifest, tokenizer: ByteLevelBPE):
    """Token-id sequences for LM training/scoring under one variant."""
    if manifest.granularity == "word":
        shuffled = apply_shuffle(corpus, manifest)
        return [tokenizer.encode(text) for text in shuffled.texts()]
    sequences = []
    for text in corpus.texts():
        ids = tokenizer.encode(text)
        perm = manifest.permutation_for(len(ids))
        sequences.append([ids[p - 1] for p in perm])
    return sequences


def run_sweep(config: ExperimentConfig, corpus: Corpus | None = None) -> dict:
    """Run every (theta, seed, vocab size) cell; skip completed ones.

    Per cell: build manifest, shuffle, train tokenizer, tokenize, train
    the n-gram proxy, measure test surprisal, append to the store.
    Failures are recorded per cell and the sweep continues.
    """
    if corpus is None:
        if not config.corpus:
            raise DataError("config has no corpus path")
        corpus = Corpus.load(config.corpus, config.language)
    train, _, test = split(
        corpus, (config.train_size, config.valid_size, config.test_size), config.split_seed
    )
    store = ResultStore(config.store)
    summary = {"computed": 0, "skipped": 0, "failed": 0}

    for vocab_size in config.vocab_sizes:
        tokenizer_cache: dict = {}

        def tokenizer_for(train_texts, cache_key):
            if cache_key not in tokenizer_cache:
                tok = ByteLevelBPE(vocab_size=vocab_size, min_frequency=config.min_frequency)
                tok.fit(train_texts)
                tokenizer_cache[cache_key] = tok
            return tokenizer_cache[cache_key]

        # vocabulary statistics for the unperturbed corpus (shuffle-invariant)
        stats_key = f"stats|{config.language}|{vocab_size}"
        if stats_key not in store:
            tok = tokenizer_for(train.texts(), ORIGINAL)
            record = stats_record(train, tok, config.r_max)
            store.append(
                {
                    "kind": "stats",
                    "key": stats_key,
                    "language": config.language,
                    "vocab_size": vocab_size,
                    **record.as_dict(),
                    "timestamp": time.time(),
                }
            )
        else:
            summary["skipped"] += 1

        for seed in config.seeds:
            for theta in config.thetas:
                key = cell_key(config.language, theta, seed, vocab_size)
                if key in store:
                    summary["skipped"] += 1
                    continue
                try:
                    theta_value = None if theta == ORIGINAL else float(theta)
                    manifest = PermutationManifest.build(
                        theta_value, config.max_len, config.granularity, seed
                    )
                    if config.granularity == "word":
                        # tokenizer trained on the shuffled training text
                        shuffled_train = apply_shuffle(train, manifest)
                        tok = tokenizer_for(
                            shuffled_train.texts(), (seed, _theta_label(theta))
                        )
                    else:
                        # subword shuffling permutes ids from the original tokenizer
                        tok = tokenizer_for(train.texts(), ORIGINAL)
                    lm = KneserNeyLM(
                        order=config.lm_order,
                        discount=config.lm_discount,
                        vocab_size=tok.n_tokens,
                    ).fit(_sequences(train, manifest, tok))
                    result = surprisal(
                        lm,
                        _sequences(test, manifest, tok),
                        theta=theta if theta == ORIGINAL else float(theta),
                        seed=seed,
                        variant=config.language,
                    )
                    store.append(
                        {
                            "kind": "surprisal",
                            "key": key,
                            "language": config.language,
                            "theta": _theta_label(theta),
                            "seed": seed,
                            "vocab_size": vocab_size,
                            "S": result.S,
                            "N": result.N,
                            "timestamp": time.time(),
                        }
                    )
                    summary["computed"] += 1
                except Exception as exc:  # record and continue with other cells
                    summary["failed"] += 1
                    store.append(
                        {
                            "kind": "error",
                            "key": "error|" + key + f"|{time.time()}",
                            "cell": key,
                            "error": f"{type(exc).__name__}: {exc}",
                            "timestamp": time.time(),
                        }
                    )
    return summary


REPORT_KINDS = ("surprisal", "delta-scatter", "vocab-size", "stats")


def _quartiles(values: list[float]) -> tuple[float, float, float]:
    arr = np.asarray(sorted(values), dtype=float)
    return (
        float(np.median(arr)),
        float(np.quantile(arr, 0.25)),
        float(np.quantile(arr, 0.75)),
    )


def _theta_sort_key(label: str):
    return (1, 0.0) if label == ORIGINAL else (0, float(label))


def report(store_path, kind: str, out_path) -> None:
    """Aggregate the store into one figure-ready CSV table."""
    store = ResultStore(store_path)
    rows = store.rows("surprisal")
    if kind not in REPORT_KINDS:
        raise DataError(f"unknown report kind {kind!r}; expected one of {REPORT_KINDS}")

    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if kind == "surprisal":
            if not rows:
                raise DataError("store has no surprisal rows")
            writer.writerow(["language", "theta", "median_S", "q25", "q75"])
            groups: dict = {}
            for r in rows:
                groups.setdefault((r["language"], r["vocab_size"], r["theta"]), []).append(r["S"])
            for (lang, _, theta), values in sorted(
                groups.items(), key=lambda kv: (kv[0][0], kv[0][1], _theta_sort_key(kv[0][2]))
            ):
                med, q25, q75 = _quartiles(values)
                writer.writerow([lang, theta, med, q25, q75])
        elif kind == "delta-scatter":
            origs = {
                (r["language"], r["seed"], r["vocab_size"]): r["S"]
                for r in rows
                if r["theta"] == ORIGINAL
            }
            irregs = [r for r in rows if r["theta"] != ORIGINAL and float(r["theta"]) == 0.0]
            if not origs or not irregs:
                raise DataError("delta-scatter needs both original and theta=0 rows")
            writer.writerow(["language", "seed", "S_orig", "delta_S_irreg"])
            for r in sorted(irregs, key=lambda r: (r["language"], r["seed"])):
                base = origs.get((r["language"], r["seed"], r["vocab_size"]))
                if base is None:
                    continue
                writer.writerow([r["language"], r["seed"], base, r["S"] - base])
        elif kind == "vocab-size":
            if not rows:
                raise DataError("store has no surprisal rows")
            writer.writerow(["language", "vocab_size", "theta", "median_S", "q25", "q75"])
            groups = {}
            for r in rows:
                groups.setdefault((r["language"], r["vocab_size"], r["theta"]), []).append(r["S"])
            for (lang, vs, theta), values in sorted(
                groups.items(), key=lambda kv: (kv[0][0], kv[0][1], _theta_sort_key(kv[0][2]))
            ):
                med, q25, q75 = _quartiles(values)
                writer.writerow([lang, vs, theta, med, q25, q75])
        elif kind == "stats":
            stats_rows = store.rows("stats")
            if not stats_rows:
                raise DataError("store has no stats rows")
            writer.writerow(["language", "vocab_size", *VocabStatsRecord.FIELDS])
            for r in sorted(stats_rows, key=lambda r: (r["language"], r["vocab_size"])):
                writer.writerow(
                    [r["language"], r["vocab_size"]] + [r[f] for f in VocabStatsRecord.FIELDS]
                )


def read_predictors_csv(path) -> tuple[list[str], np.ndarray]:
    """Predictors CSV: header ``language`` + the nine stats columns."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "language":
            raise DataError(f"{path}: first column must be 'language'")
        expected = list(VocabStatsRecord.FIELDS)
        if header[1:] != expected:
            raise DataError(f"{path}: predictor columns must be {expected}")
        languages, data = [], []
        for row in reader:
            if not row:
                continue
            languages.append(row[0])
            data.append([float(v) for v in row[1:]])
    if not languages:
        raise DataError(f"{path}: no data rows")
    return languages, np.asarray(data)


def read_responses_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    """Responses CSV: header ``language`` + one column per theta slice."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "language":
            raise DataError(f"{path}: first column must be 'language'")
        slices = header[1:]
        if not slices:
            raise DataError(f"{path}: no response columns")
        languages, data = [], []
        for row in reader:
            if not row:
                continue
            languages.append(row[0])
            data.append([float(v) for v in row[1:]])
    if not languages:
        raise DataError(f"{path}: no data rows")
    return languages, slices, np.asarray(data)


def pls_report(predictors_path, responses_path, n_components, out_dir) -> dict:
    """Fit PLS on predictor/response tables and write result CSVs.

    ``n_components`` may be an int or "auto" (LOO-CV selection). Writes
    predictions, scores, loadings, coefficients, and R-squared tables to
    ``out_dir`` and returns the output paths with headline numbers.
    """
    languages, X = read_predictors_csv(predictors_path)
    resp_languages, slices, Y = read_responses_csv(responses_path)
    if resp_languages != languages:
        raise DataError("predictor and response language rows do not match")

    if n_components == "auto":
        k = pls_mod.select_components(X, Y, k_max=min(X.shape[1], X.shape[0] - 2))
    else:
        k = int(n_components)
    model = pls_mod.PLS2Regression(k).fit(X, Y)
    cv = pls_mod.loo_cv(X, Y, k)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}

    def write(name, header, rows):
        path = out_dir / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        paths[name] = str(path)

    comp_names = [f"component_{i + 1}" for i in range(model.n_components_)]
    write(
        "pls_predictions.csv",
        ["language", *slices],
        [[lang, *cv.predictions[i]] for i, lang in enumerate(languages)],
    )
    write(
        "pls_scores.csv",
        ["language", *comp_names],
        [[lang, *model.scores_[i]] for i, lang in enumerate(languages)],
    )
    write(
        "pls_x_loadings.csv",
        ["predictor", *comp_names],
        [[f, *model.x_loadings_[i]] for i, f in enumerate(VocabStatsRecord.FIELDS)],
    )
    write(
        "pls_y_loadings.csv",
        ["slice", *comp_names],
        [[s, *model.y_loadings_[i]] for i, s in enumerate(slices)],
    )
    write(
        "pls_coefficients.csv",
        ["predictor", *slices],
        [[f, *model.coef_[i]] for i, f in enumerate(VocabStatsRecord.FIELDS)],
    )
    write(
        "pls_r2_per_language.csv",
        ["language", "r2"],
        [[lang, cv.per_row_r2[i]] for i, lang in enumerate(languages)],
    )
    write(
        "pls_r2_per_slice.csv",
        ["slice", "r2"],
        [[s, cv.per_slice_r2[i]] for i, s in enumerate(slices)],
    )
    write("pls_r2_overall.csv", ["n_components", "overall_r2"], [[k, cv.overall_r2]])
    return {"n_components": k, "overall_r2": cv.overall_r2, "paths": paths}

"""Deterministic per-length shuffling of a corpus.

A manifest holds one permutation per sequence length, so applying it to
a corpus is a deterministic, invertible transformation: every sentence
of length n is reordered by the same permutation. The order parameter
theta controls how far the permutations stray from the original order;
``theta=None`` (the "original" sentinel) yields identity permutations.

Reproducibility: permutations for length n are drawn from a PCG64
generator seeded with ``SeedSequence([seed, n])``, so each length has an
independent substream and extending ``max_len`` later never perturbs the
permutations already drawn.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .errors import DataError
from .mallows import MallowsDistribution, check_permutation, identity_permutation

MANIFEST_VERSION = 1

ORIGINAL = "original"


def _length_rng(seed: int, n: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, n])))


@dataclass(frozen=True)
class PermutationManifest:
    """One permutation per sentence length, defining a language variant."""

    theta: float | None  # None means "original" (identity, theta -> +inf)
    granularity: str  # "word" or "subword"
    seed: int
    max_len: int
    perms: dict[int, tuple[int, ...]]

    def __post_init__(self):
        if self.granularity not in ("word", "subword"):
            raise ValueError(f"granularity must be 'word' or 'subword': {self.granularity!r}")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        if sorted(self.perms) != list(range(1, self.max_len + 1)):
            raise ValueError("manifest must cover every length 1..max_len exactly once")
        for n, perm in self.perms.items():
            if len(check_permutation(perm)) != n:
                raise ValueError(f"permutation for length {n} has length {len(perm)}")

    @classmethod
    def build(
        cls,
        theta: float | None,
        max_len: int,
        granularity: str = "word",
        seed: int = 0,
    ) -> "PermutationManifest":
        """Sample one permutation per length from independent substreams."""
        perms: dict[int, tuple[int, ...]] = {}
        for n in range(1, max_len + 1):
            if theta is None:
                perms[n] = identity_permutation(n)
            else:
                dist = MallowsDistribution(n, float(theta))
                perms[n] = dist.sample_permutation(_length_rng(seed, n))
        return cls(theta if theta is None else float(theta), granularity, seed, max_len, perms)

    def to_json(self) -> str:
        payload = {
            "version": MANIFEST_VERSION,
            "theta": ORIGINAL if self.theta is None else self.theta,
            "granularity": self.granularity,
            "seed": self.seed,
            "max_len": self.max_len,
            "perms": {str(n): list(perm) for n, perm in sorted(self.perms.items())},
        }
        return json.dumps(payload, indent=0, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PermutationManifest":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"manifest is not valid JSON: {exc}") from exc
        if payload.get("version") != MANIFEST_VERSION:
            raise DataError(f"unsupported manifest version: {payload.get('version')!r}")
        theta = payload["theta"]
        return cls(
            theta=None if theta == ORIGINAL else float(theta),
            granularity=payload["granularity"],
            seed=int(payload["seed"]),
            max_len=int(payload["max_len"]),
            perms={int(n): tuple(perm) for n, perm in payload["perms"].items()},
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "PermutationManifest":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def permutation_for(self, n: int) -> tuple[int, ...]:
        if n not in self.perms:
            raise DataError(f"sequence length {n} exceeds manifest max_len {self.max_len}")
        return self.perms[n]


def build_manifest(theta, max_len: int, granularity: str = "word", seed: int = 0):
    return PermutationManifest.build(theta, max_len, granularity, seed)


def _permute(seq: list, perm: tuple[int, ...]) -> list:
    return [seq[p - 1] for p in perm]


def _unpermute(seq: list, perm: tuple[int, ...]) -> list:
    out = [None] * len(seq)
    for i, p in enumerate(perm):
        out[p - 1] = seq[i]
    return out


def apply_shuffle(corpus: Corpus, manifest: PermutationManifest, tokenizer=None) -> Corpus:
    """Reorder every sentence by the manifest permutation for its length.

    Word granularity permutes the words of each sentence. Subword
    granularity encodes the sentence with the tokenizer, permutes the
    token ids by the permutation for the token count, and stores the
    result as printable token strings (lossless, id-recoverable).
    """
    if manifest.granularity == "subword" and tokenizer is None:
        raise ValueError("subword shuffling requires a tokenizer")
    sentences = []
    for words in corpus.sentences:
        if manifest.granularity == "word":
            perm = manifest.permutation_for(len(words))
            sentences.append(_permute(words, perm))
        else:
            ids = tokenizer.encode(" ".join(words))
            perm = manifest.permutation_for(len(ids))
            sentences.append([tokenizer.id_to_token(i) for i in _permute(ids, perm)])
    return Corpus(sentences, corpus.language)


def invert_shuffle(corpus: Corpus, manifest: PermutationManifest, tokenizer=None) -> Corpus:
    """Exact inverse of :func:`apply_shuffle` under the same manifest."""
    if manifest.granularity == "subword" and tokenizer is None:
        raise ValueError("subword unshuffling requires a tokenizer")
    sentences = []
    for units in corpus.sentences:
        perm = manifest.permutation_for(len(units))
        if manifest.granularity == "word":
            sentences.append(_unpermute(units, perm))
        else:
            ids = _unpermute([tokenizer.token_to_id(t) for t in units], perm)
            sentences.append(tokenizer.decode(ids).split(" "))
    return Corpus(sentences, corpus.language)


class MallowsShuffler:
    """Deterministic corpus shuffler with a fit/transform interface.

    Parameters mirror the manifest: ``theta=None`` keeps the original
    order. ``fit`` samples the manifest; ``transform`` shuffles a corpus
    (or list of tokenized sentences) and ``inverse_transform`` undoes it.
    """

    def __init__(self, theta=None, max_len: int = 80, granularity: str = "word",
                 seed: int = 0, tokenizer=None):
        self.theta = theta
        self.max_len = max_len
        self.granularity = granularity
        self.seed = seed
        self.tokenizer = tokenizer

    def get_params(self, deep: bool = True) -> dict:
        return {
            "theta": self.theta,
            "max_len": self.max_len,
            "granularity": self.granularity,
            "seed": self.seed,
            "tokenizer": self.tokenizer,
        }

    def set_params(self, **params) -> "MallowsShuffler":
        for key, value in params.items():
            if key not in self.get_params():
                raise ValueError(f"invalid parameter {key!r}")
            setattr(self, key, value)
        return self

    def fit(self, X=None, y=None) -> "MallowsShuffler":
        self.manifest_ = PermutationManifest.build(
            self.theta, self.max_len, self.granularity, self.seed
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "manifest_"):
            raise RuntimeError("MallowsShuffler is not fitted; call fit() first")

    def _coerce(self, X) -> tuple[Corpus, bool]:
        if isinstance(X, Corpus):
            return X, True
        return Corpus([list(s) for s in X]), False

    def transform(self, X):
        self._check_fitted()
        corpus, was_corpus = self._coerce(X)
        out = apply_shuffle(corpus, self.manifest_, self.tokenizer)
        return out if was_corpus else out.sentences

    def inverse_transform(self, X):
        self._check_fitted()
        corpus, was_corpus = self._coerce(X)
        out = invert_shuffle(corpus, self.manifest_, self.tokenizer)
        return out if was_corpus else out.sentences

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)

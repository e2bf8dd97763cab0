"""Shared test helpers: enumeration oracles and synthetic corpora."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from shufflelearn import Corpus


def enumerate_mallows(n: int, theta: float) -> dict[tuple, float]:
    """Brute-force distribution over all n! permutations (oracle)."""
    weights = {}
    for pi in itertools.permutations(range(1, n + 1)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if pi[i] > pi[j])
        weights[pi] = math.exp(-theta * inv)
    total = sum(weights.values())
    return {pi: w / total for pi, w in weights.items()}


def pseudo_words(n: int, seed: int = 0) -> list[str]:
    """Distinct pronounceable pseudo-words."""
    rng = np.random.default_rng(seed)
    onsets = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
              "st", "tr", "kl", "pr"]
    nuclei = ["a", "e", "i", "o", "u", "ai", "ei", "ou"]
    codas = ["", "n", "s", "t", "r", "l", "k", "m"]
    words: list[str] = []
    seen = set()
    while len(words) < n:
        k = rng.integers(2, 4)
        w = "".join(
            onsets[rng.integers(len(onsets))]
            + nuclei[rng.integers(len(nuclei))]
            + (codas[rng.integers(len(codas))] if j == k - 1 else "")
            for j in range(k)
        )
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def make_markov_corpus(
    n_sentences: int,
    vocab_size: int = 1200,
    seed: int = 0,
    min_len: int = 4,
    max_len: int = 28,
    language: str = "syn",
) -> Corpus:
    """Corpus drawn from a sparse first-order Markov chain over pseudo-words.

    Strong local word-order regularity, so word-level shuffling degrades
    next-token predictability the way it does for natural text.
    """
    rng = np.random.default_rng(seed)
    words = pseudo_words(vocab_size, seed=seed + 1)
    branch = 6
    successors = rng.integers(0, vocab_size, size=(vocab_size, branch))
    probs = np.array([0.40, 0.25, 0.15, 0.10, 0.06, 0.04])
    cdf = np.cumsum(probs)

    lengths = rng.integers(min_len, max_len + 1, size=n_sentences)
    max_steps = int(lengths.max())
    state = rng.integers(0, vocab_size, size=n_sentences)
    columns = [state.copy()]
    for _ in range(max_steps - 1):
        pick = np.searchsorted(cdf, rng.random(n_sentences), side="right")
        pick = np.minimum(pick, branch - 1)
        state = successors[state, pick]
        columns.append(state.copy())
    grid = np.column_stack(columns)
    sentences = [[words[w] for w in grid[i, : lengths[i]]] for i in range(n_sentences)]
    return Corpus(sentences, language)


@pytest.fixture(scope="session")
def small_markov_corpus() -> Corpus:
    return make_markov_corpus(2000, vocab_size=400, seed=11)


# one "[criterion NN] PASS/FAIL" line per acceptance criterion, echoed in
# the terminal summary so they survive pytest's output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

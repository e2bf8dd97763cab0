"""Corpus container, line cleaning rules, and deterministic splits.

A corpus is a list of sentences, each a list of lowercase words
(whitespace-delimited orthographic units). Cleaning rules are ordered
data, not code: each rule is a dict with an ``action`` key, so new
language-specific rules can be added without touching the engine.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

DEFAULT_MAX_LEN = 80

# Characters stripped from word edges after line-level cleaning. Word
# internal hyphens/colons/periods survive (e.g. "eu:n", "e.g").
_EDGE_PUNCT = ".,!?;:\"'()[]{}<>«»“”‘’…‐‑–—-*·%&/\\#@+=~^_|`"

# Shared cleaning rules, applied in order. Actions:
#   drop  - discard the line when the pattern matches
#   sub   - regex substitution
#   split - break the line into several candidate sentences
DEFAULT_RULES: list[dict] = [
    {"action": "drop", "pattern": r"^\s*$"},
    {"action": "drop", "pattern": r"^[\W_\s]+$"},
    {"action": "drop", "pattern": r"^\s*<"},                 # markup / speaker tags
    {"action": "drop", "pattern": r"^\s*\([A-Z]{2,3}\)\s*$"},  # bare language labels
    {"action": "drop", "pattern": r"https?://|www\."},
    {"action": "sub", "pattern": "\\u00ad", "repl": "-"},  # soft hyphen
    {"action": "sub", "pattern": "[\\ufffd\\u200b]", "repl": ""},
    # strip brackets and quotes, keep enclosed text
    {"action": "sub", "pattern": r"[()\[\]{}«»“”\"‘’']", "repl": ""},
    {"action": "split", "pattern": r";|:(?=\s|$)"},
    {"action": "sub", "pattern": r"\s+", "repl": " "},
]

# Language-specific rules inserted before the shared split rule.
LANGUAGE_RULES: dict[str, list[dict]] = {
    # rejoin mistaken spaces in abbreviation case endings ("EU: n" -> "EU:n")
    "fi": [{"action": "sub", "pattern": r"(\w):\s+(?=[a-zåäö]{1,4}\b)", "repl": r"\1:"}],
}


@dataclass
class Corpus:
    """An ordered list of tokenized sentences with a language tag."""

    sentences: list[list[str]]
    language: str = "und"

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def texts(self) -> list[str]:
        return [" ".join(words) for words in self.sentences]

    def to_lines(self) -> str:
        return "\n".join(self.texts()) + ("\n" if self.sentences else "")

    @classmethod
    def from_lines(cls, lines, language: str = "und") -> "Corpus":
        if isinstance(lines, str):
            lines = lines.splitlines()
        sentences = [line.split() for line in lines if line.strip()]
        return cls(sentences, language)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_lines())

    @classmethod
    def load(cls, path, language: str = "und") -> "Corpus":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_lines(fh.read(), language)


@dataclass
class PreprocessReport:
    """Counts of what the cleaning pass dropped or repaired."""

    kept: int = 0
    dropped: int = 0
    invalid_utf8: int = 0
    by_rule: dict = field(default_factory=dict)


def build_rules(language: str | None = None, extra_rules: list[dict] | None = None) -> list[dict]:
    """Assemble the ordered rule list for a language."""
    rules = [dict(r) for r in DEFAULT_RULES]
    lang_rules = LANGUAGE_RULES.get(language or "", []) + (extra_rules or [])
    if lang_rules:
        # language rules run after artifact repair, before the split rule
        split_at = next(i for i, r in enumerate(rules) if r["action"] == "split")
        rules = rules[:split_at] + [dict(r) for r in lang_rules] + rules[split_at:]
    return rules


def _is_word(token: str) -> bool:
    return any(ch.isalnum() for ch in token)


def _clean_tokens(text: str) -> list[str]:
    words = []
    for token in text.lower().split():
        token = token.strip(_EDGE_PUNCT)
        # drop leftover punctuation-only tokens entirely
        if token and _is_word(token):
            words.append(token)
    return words


def preprocess(
    raw_lines,
    language: str | None = None,
    max_len: int = DEFAULT_MAX_LEN,
    rules: list[dict] | None = None,
) -> tuple[Corpus, PreprocessReport]:
    """Clean raw text into a Corpus, one candidate sentence per line.

    ``raw_lines`` may be an iterable of str or bytes lines; invalid UTF-8
    lines are skipped and counted in the report.
    """
    if rules is None:
        rules = build_rules(language)
    report = PreprocessReport()
    sentences: list[list[str]] = []
    if isinstance(raw_lines, (str, bytes)):
        raw_lines = raw_lines.splitlines()

    for raw in raw_lines:
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError:
                report.invalid_utf8 += 1
                report.dropped += 1
                continue
        pieces = [unicodedata.normalize("NFC", raw.rstrip("\n"))]
        dropped = False
        for rule in rules:
            action = rule["action"]
            if action == "drop":
                if any(re.search(rule["pattern"], p) for p in pieces):
                    report.by_rule[rule["pattern"]] = report.by_rule.get(rule["pattern"], 0) + 1
                    dropped = True
                    break
            elif action == "sub":
                pieces = [re.sub(rule["pattern"], rule["repl"], p) for p in pieces]
            elif action == "split":
                pieces = [part for p in pieces for part in re.split(rule["pattern"], p)]
            else:
                raise ValueError(f"unknown rule action: {action!r}")
        if dropped:
            report.dropped += 1
            continue
        kept_any = False
        for piece in pieces:
            words = _clean_tokens(piece)
            if words and len(words) <= max_len:
                sentences.append(words)
                kept_any = True
        if kept_any:
            report.kept += 1
        else:
            report.dropped += 1

    return Corpus(sentences, language or "und"), report


def split(
    corpus: Corpus,
    sizes: tuple[int, int, int],
    seed: int = 0,
) -> tuple[Corpus, Corpus, Corpus]:
    """Deterministic disjoint train/valid/test split by sentence.

    Sentences are assigned by a seeded permutation of their indices, so
    the same (corpus, sizes, seed) always yields the same split.
    """
    n_train, n_valid, n_test = (int(s) for s in sizes)
    needed = n_train + n_valid + n_test
    if len(corpus) < needed:
        raise DataError(
            f"corpus has {len(corpus)} sentences, need {needed} "
            f"({needed - len(corpus)} short)"
        )
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    order = rng.permutation(len(corpus))
    pick = lambda idx: Corpus([corpus.sentences[i] for i in sorted(idx)], corpus.language)
    train = pick(order[:n_train])
    valid = pick(order[n_train : n_train + n_valid])
    test = pick(order[n_train + n_valid : needed])
    return train, valid, test

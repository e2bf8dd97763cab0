"""Byte-level BPE tokenizer trained from scratch.

Tokens are byte sequences over the full 256-byte alphabet plus two
specials (padding, end-of-text), so any UTF-8 text round-trips exactly
and no unknown token can occur. Pre-tokenization splits text into
pieces with the pattern ``' ?\\S+|\\s+'`` (a word keeps its single
leading space); merges never cross piece boundaries.

Determinism: merge-frequency ties are broken by the lexicographically
smallest (left bytes, right bytes) pair, so training is reproducible
across runs and platforms given identical corpus bytes.
"""

from __future__ import annotations

import heapq
import json
import re
from collections import Counter

from .errors import DataError

N_BYTES = 256
PAD_ID = 256
EOT_ID = 257
N_SPECIALS = 2
MIN_VOCAB = N_BYTES + N_SPECIALS

PAD_TOKEN = "<pad>"
EOT_TOKEN = "<eot>"

_PIECE_RE = re.compile(r" ?\S+|\s+")

TOKENIZER_VERSION = 1


def _byte_to_unicode() -> dict[int, str]:
    """Invertible map from bytes to printable unicode characters.

    Printable ASCII and latin-1 symbols map to themselves; the remaining
    bytes are shifted into the U+0100.. range so every token has a
    readable single-character-per-byte string form.
    """
    keep = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("¡"), ord("¬") + 1))
        + list(range(ord("®"), ord("ÿ") + 1))
    )
    mapping = {}
    extra = 0
    for b in range(N_BYTES):
        if b in keep:
            mapping[b] = chr(b)
        else:
            mapping[b] = chr(N_BYTES + extra)
            extra += 1
    return mapping


_BYTE_TO_CHAR = _byte_to_unicode()
_CHAR_TO_BYTE = {c: b for b, c in _BYTE_TO_CHAR.items()}


def _token_string(token_bytes: bytes) -> str:
    return "".join(_BYTE_TO_CHAR[b] for b in token_bytes)


def _token_bytes(token_string: str) -> bytes:
    return bytes(_CHAR_TO_BYTE[c] for c in token_string)


class ByteLevelBPE:
    """Byte-level BPE tokenizer with a fit/encode/decode interface.

    ``vocab_size`` counts the byte alphabet, the two specials, and the
    learned merges. Training stops at ``vocab_size`` tokens or when no
    pair reaches ``min_frequency``.
    """

    def __init__(self, vocab_size: int = 16000, min_frequency: int = 2):
        self.vocab_size = vocab_size
        self.min_frequency = min_frequency

    def get_params(self, deep: bool = True) -> dict:
        return {"vocab_size": self.vocab_size, "min_frequency": self.min_frequency}

    def set_params(self, **params) -> "ByteLevelBPE":
        for key, value in params.items():
            if key not in self.get_params():
                raise ValueError(f"invalid parameter {key!r}")
            setattr(self, key, value)
        return self

    # -- training ---------------------------------------------------------

    def fit(self, texts, y=None) -> "ByteLevelBPE":
        if self.vocab_size < MIN_VOCAB:
            raise ValueError(
                f"vocab_size must be >= {MIN_VOCAB} (256 bytes + {N_SPECIALS} specials)"
            )
        if self.min_frequency < 1:
            raise ValueError("min_frequency must be >= 1")

        piece_freq: Counter[str] = Counter()
        for text in texts:
            piece_freq.update(_PIECE_RE.findall(text))
        if not piece_freq:
            raise DataError("training corpus is empty")

        # vocab: id -> bytes; specials carry no bytes
        vocab: list[bytes] = [bytes([b]) for b in range(N_BYTES)]
        vocab.append(b"")  # PAD_ID
        vocab.append(b"")  # EOT_ID

        # stable order: insertion order of Counter is first occurrence
        words: list[list[int]] = []
        freqs: list[int] = []
        for piece, freq in piece_freq.items():
            words.append(list(piece.encode("utf-8")))
            freqs.append(freq)

        pair_counts: Counter[tuple[int, int]] = Counter()
        pair_words: dict[tuple[int, int], set[int]] = {}
        for wi, symbols in enumerate(words):
            for pair in zip(symbols, symbols[1:]):
                pair_counts[pair] += freqs[wi]
                pair_words.setdefault(pair, set()).add(wi)

        # lazy max-heap keyed by (-count, left bytes, right bytes)
        heap: list[tuple[int, bytes, bytes, tuple[int, int]]] = []

        def push(pair):
            count = pair_counts[pair]
            if count > 0:
                heapq.heappush(heap, (-count, vocab[pair[0]], vocab[pair[1]], pair))

        for pair in pair_counts:
            push(pair)

        merges: list[tuple[int, int]] = []
        while len(vocab) < self.vocab_size and heap:
            neg_count, _, _, pair = heapq.heappop(heap)
            count = pair_counts.get(pair, 0)
            if count != -neg_count:
                continue  # stale heap entry
            if count < self.min_frequency:
                break
            new_id = len(vocab)
            vocab.append(vocab[pair[0]] + vocab[pair[1]])
            merges.append(pair)

            touched: set[tuple[int, int]] = set()
            for wi in pair_words.pop(pair, ()):
                symbols = words[wi]
                freq = freqs[wi]
                old_pairs = Counter(zip(symbols, symbols[1:]))
                merged: list[int] = []
                i = 0
                while i < len(symbols):
                    if i + 1 < len(symbols) and (symbols[i], symbols[i + 1]) == pair:
                        merged.append(new_id)
                        i += 2
                    else:
                        merged.append(symbols[i])
                        i += 1
                words[wi] = merged
                new_pairs = Counter(zip(merged, merged[1:]))
                for p, c in (new_pairs - old_pairs).items():
                    pair_counts[p] += c * freq
                    pair_words.setdefault(p, set()).add(wi)
                    touched.add(p)
                for p, c in (old_pairs - new_pairs).items():
                    pair_counts[p] -= c * freq
                    if pair_counts[p] <= 0:
                        pair_counts.pop(p, None)
                        if p in pair_words:
                            pair_words[p].discard(wi)
                    touched.add(p)
                for p in new_pairs:
                    if p in pair_words:
                        pair_words[p].add(wi)
            pair_counts.pop(pair, None)
            for p in touched:
                push(p)

        self.vocab_ = vocab
        self.merges_ = merges
        self.ranks_ = {pair: (rank, MIN_VOCAB + rank) for rank, pair in enumerate(merges)}
        self._piece_cache: dict[str, tuple[int, ...]] = {}
        return self

    # -- encode / decode --------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "vocab_"):
            raise RuntimeError("ByteLevelBPE is not fitted; call fit() first")

    def _encode_piece(self, piece: str) -> tuple[int, ...]:
        cached = self._piece_cache.get(piece)
        if cached is not None:
            return cached
        symbols = list(piece.encode("utf-8"))
        while len(symbols) > 1:
            best = None
            for pair in zip(symbols, symbols[1:]):
                entry = self.ranks_.get(pair)
                if entry is not None and (best is None or entry[0] < best[0][0]):
                    best = (entry, pair)
            if best is None:
                break
            (rank, new_id), pair = best
            merged = []
            i = 0
            while i < len(symbols):
                if i + 1 < len(symbols) and (symbols[i], symbols[i + 1]) == pair:
                    merged.append(new_id)
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            symbols = merged
        ids = tuple(symbols)
        if len(self._piece_cache) < 1_000_000:
            self._piece_cache[piece] = ids
        return ids

    def encode(self, text: str, add_eot: bool = False) -> list[int]:
        """Tokenize text to ids by replaying merges in training order."""
        self._check_fitted()
        ids: list[int] = []
        for piece in _PIECE_RE.findall(text):
            ids.extend(self._encode_piece(piece))
        if add_eot:
            ids.append(EOT_ID)
        return ids

    def decode(self, ids) -> str:
        """Exact byte-level inverse of encode; specials render as nothing."""
        self._check_fitted()
        chunks = []
        for i in ids:
            i = int(i)
            if not 0 <= i < len(self.vocab_):
                raise DataError(f"token id {i} out of range (vocab size {len(self.vocab_)})")
            chunks.append(self.vocab_[i])
        return b"".join(chunks).decode("utf-8")

    def transform(self, texts) -> list[list[int]]:
        return [self.encode(t) for t in texts]

    def id_to_token(self, token_id: int) -> str:
        self._check_fitted()
        token_id = int(token_id)
        if token_id == PAD_ID:
            return PAD_TOKEN
        if token_id == EOT_ID:
            return EOT_TOKEN
        if not 0 <= token_id < len(self.vocab_):
            raise DataError(f"token id {token_id} out of range")
        return _token_string(self.vocab_[token_id])

    def token_to_id(self, token: str) -> int:
        self._check_fitted()
        if token == PAD_TOKEN:
            return PAD_ID
        if token == EOT_TOKEN:
            return EOT_ID
        if not hasattr(self, "_token_index"):
            self._token_index = {
                _token_string(tb): i
                for i, tb in enumerate(self.vocab_)
                if i not in (PAD_ID, EOT_ID)
            }
        try:
            return self._token_index[token]
        except KeyError:
            raise DataError(f"unknown token {token!r}") from None

    @property
    def n_tokens(self) -> int:
        self._check_fitted()
        return len(self.vocab_)

    # -- serialization ----------------------------------------------------

    def to_json(self) -> str:
        self._check_fitted()
        payload = {
            "version": TOKENIZER_VERSION,
            "vocab_size": self.vocab_size,
            "min_frequency": self.min_frequency,
            "vocab": {self.id_to_token(i): i for i in range(len(self.vocab_))},
            "merges": [list(pair) for pair in self.merges_],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "ByteLevelBPE":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"tokenizer model is not valid JSON: {exc}") from exc
        if payload.get("version") != TOKENIZER_VERSION:
            raise DataError(f"unsupported tokenizer version: {payload.get('version')!r}")
        model = cls(vocab_size=payload["vocab_size"], min_frequency=payload["min_frequency"])
        vocab = [bytes([b]) for b in range(N_BYTES)] + [b"", b""]
        merges = [tuple(p) for p in payload["merges"]]
        for a, b in merges:
            vocab.append(vocab[a] + vocab[b])
        stored = payload.get("vocab")
        if stored is not None and len(stored) != len(vocab):
            raise DataError("vocab table inconsistent with merge list")
        model.vocab_ = vocab
        model.merges_ = merges
        model.ranks_ = {pair: (rank, MIN_VOCAB + rank) for rank, pair in enumerate(merges)}
        model._piece_cache = {}
        return model

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "ByteLevelBPE":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

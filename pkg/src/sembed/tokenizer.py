"""Whitespace/punctuation tokenizer, frequency-ranked vocabulary, padded batching."""

from __future__ import annotations

import functools
import unicodedata
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

PAD, CLS, SEP, UNK = "[PAD]", "[CLS]", "[SEP]", "[UNK]"
RESERVED = (PAD, CLS, SEP, UNK)
PAD_ID, CLS_ID, SEP_ID, UNK_ID = 0, 1, 2, 3


@functools.lru_cache(maxsize=65536)
def _fold_char(ch: str) -> str:
    # Approximates simple (1:1) case folding: full foldings that expand are skipped.
    folded = ch.casefold()
    if len(folded) == 1:
        return folded
    lowered = ch.lower()
    return lowered if len(lowered) == 1 else ch


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Split ``text`` into lowercase word and punctuation tokens.

    >>> tokenize("Hello, world")
    ['hello', ',', 'world']
    """
    text = unicodedata.normalize("NFC", text)
    text = "".join(_fold_char(ch) for ch in text)
    tokens: list[str] = []
    for chunk in text.split():
        word = []
        for ch in chunk:
            if _is_punct(ch):
                if word:
                    tokens.append("".join(word))
                    word = []
                tokens.append(ch)
            else:
                word.append(ch)
        if word:
            tokens.append("".join(word))
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    """Token ids; ids 0-3 are the reserved special tokens, the rest follow ``tokens``."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        table = {tok: i for i, tok in enumerate(RESERVED)}
        for tok in self.tokens:
            if tok in table:
                raise InputError(f"duplicate or reserved token in vocabulary: {tok!r}")
            table[tok] = len(table)
        object.__setattr__(self, "_ids", table)

    @property
    def token_to_id(self) -> dict[str, int]:
        return dict(self._ids)

    @property
    def size(self) -> int:
        return len(self._ids)

    def __len__(self) -> int:
        return self.size

    def id(self, token: str) -> int:
        return self._ids.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        if idx < len(RESERVED):
            return RESERVED[idx]
        return self.tokens[idx - len(RESERVED)]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(tok + "\n" for tok in self.tokens), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(tuple(lines))


def build_vocab(corpus: Iterable[str], max_size: int) -> Vocabulary:
    """Rank tokens by frequency (desc) then lexicographically; keep ``max_size - 4``."""
    if max_size < 5:
        raise InputError(f"max_size must be >= 5, got {max_size}")
    counts = Counter(tok for text in corpus for tok in tokenize(text))
    for special in RESERVED:
        counts.pop(special, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(tuple(tok for tok, _ in ranked[: max_size - len(RESERVED)]))


@dataclass(frozen=True)
class TokenBatch:
    ids: np.ndarray  # [B, T] int64
    mask: np.ndarray  # [B, T] int64, 1 = real token
    lengths: np.ndarray  # [B]

    @property
    def shape(self) -> tuple[int, int]:
        return self.ids.shape

    def pad_to(self, width: int) -> "TokenBatch":
        """Return the same batch with extra trailing [PAD] columns."""
        b, t = self.ids.shape
        if width < t:
            raise InputError(f"cannot pad batch of width {t} down to {width}")
        ids = np.full((b, width), PAD_ID, dtype=np.int64)
        mask = np.zeros((b, width), dtype=np.int64)
        ids[:, :t] = self.ids
        mask[:, :t] = self.mask
        return TokenBatch(ids, mask, self.lengths.copy())

    def take(self, rows: Sequence[int]) -> "TokenBatch":
        rows = np.asarray(rows, dtype=np.int64)
        return TokenBatch(self.ids[rows], self.mask[rows], self.lengths[rows])


def encode_batch(texts: Sequence[str], vocab: Vocabulary, max_len: int) -> TokenBatch:
    """``[CLS] tokens[:max_len-2] [SEP]`` per text, right-padded to the longest row."""
    if max_len < 3:
        raise InputError(f"max_len must be >= 3, got {max_len}")
    rows = []
    for text in texts:
        content = [vocab.id(tok) for tok in tokenize(text)][: max_len - 2]
        rows.append([CLS_ID, *content, SEP_ID])
    width = max((len(r) for r in rows), default=2)
    ids = np.full((len(rows), width), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(rows), width), dtype=np.int64)
    for i, row in enumerate(rows):
        ids[i, : len(row)] = row
        mask[i, : len(row)] = 1
    return TokenBatch(ids, mask, mask.sum(axis=1))

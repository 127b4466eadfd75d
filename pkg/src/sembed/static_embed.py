"""Averaged static word vectors with hashed character n-gram fallback.

Word-vector files use the common text layout: a ``count dim`` header, then one
line per word with the token followed by ``dim`` space-separated reals.  An
optional bucket file has the same layout with integer bucket ids in place of
words and ``num_buckets dim`` as its header.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError
from .tokenizer import tokenize

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(text: str) -> int:
    """64-bit FNV-1a over the UTF-8 bytes of ``text``."""
    h = FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def char_ngrams(word: str, ngram_min: int = 3, ngram_max: int = 6) -> list[str]:
    """All character n-grams of ``<word>`` with lengths in ``[ngram_min, ngram_max]``."""
    marked = f"<{word}>"
    return [
        marked[i : i + n]
        for n in range(ngram_min, ngram_max + 1)
        for i in range(len(marked) - n + 1)
    ]


@dataclass
class WordVectorTable:
    dim: int
    word_vectors: dict[str, np.ndarray] = field(default_factory=dict)
    bucket_vectors: np.ndarray | None = None
    ngram_min: int = 3
    ngram_max: int = 6

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not 1 <= self.ngram_min <= self.ngram_max:
            raise ValueError(f"need 1 <= ngram_min <= ngram_max, got {self.ngram_min}, {self.ngram_max}")
        for word, vec in self.word_vectors.items():
            if np.shape(vec) != (self.dim,):
                raise ValueError(f"vector for {word!r} has shape {np.shape(vec)}, expected ({self.dim},)")
        if self.bucket_vectors is not None and (
            self.bucket_vectors.ndim != 2 or self.bucket_vectors.shape[1] != self.dim
        ):
            raise ValueError(f"bucket matrix shape {self.bucket_vectors.shape} does not match dim {self.dim}")

    def __len__(self) -> int:
        return len(self.word_vectors)

    def __contains__(self, word: str) -> bool:
        return word in self.word_vectors

    def ngram_buckets(self, word: str) -> list[int]:
        if self.bucket_vectors is None:
            return []
        n = self.bucket_vectors.shape[0]
        return [fnv1a_64(g) % n for g in char_ngrams(word, self.ngram_min, self.ngram_max)]


def word_vector(table: WordVectorTable, word: str) -> np.ndarray:
    """Stored vector, else the mean of the word's n-gram bucket vectors, else zeros."""
    vec = table.word_vectors.get(word)
    if vec is not None:
        return vec.copy()
    buckets = table.ngram_buckets(word)
    if not buckets:
        return np.zeros(table.dim)
    return table.bucket_vectors[buckets].mean(axis=0)


def sentence_embed_avg(table: WordVectorTable, text: str) -> np.ndarray:
    """Mean of the non-zero word vectors of ``text``; zeros if there are none."""
    vecs = [v for v in (word_vector(table, tok) for tok in tokenize(text)) if np.any(v)]
    if not vecs:
        return np.zeros(table.dim)
    return np.mean(vecs, axis=0)


def _parse_header(line: str, path: str) -> tuple[int, int]:
    parts = line.split()
    try:
        if len(parts) != 2:
            raise ValueError
        count, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError(f"malformed header {line.strip()!r}; expected 'count dim'", path, 1) from None
    if count < 0 or dim < 1:
        raise ParseError(f"header has invalid count/dim {count}/{dim}", path, 1)
    return count, dim


def _parse_rows(path: str):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise ParseError("empty file", path, 1)
        count, dim = _parse_header(header, path)
        rows = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").rstrip("\r").split(" ")
            while parts and parts[-1] == "":
                parts.pop()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise ParseError(f"expected a token and {dim} values, got {len(parts) - 1} values", path, lineno)
            try:
                values = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError:
                raise ParseError("non-numeric vector component", path, lineno) from None
            rows.append((lineno, parts[0], values))
    return count, dim, rows


def load_vectors(path: str | Path, buckets_path: str | Path | None = None, ngram_min: int = 3, ngram_max: int = 6) -> WordVectorTable:
    """Parse a text word-vector file (first occurrence of a duplicate word wins)."""
    path = str(path)
    count, dim, rows = _parse_rows(path)
    if len(rows) != count:
        raise ParseError(f"header declares {count} words, found {len(rows)}", path)
    words: dict[str, np.ndarray] = {}
    for _, word, vec in rows:
        words.setdefault(word, vec)
    buckets = load_buckets(buckets_path, dim) if buckets_path is not None else None
    return WordVectorTable(dim, words, buckets, ngram_min, ngram_max)


def load_buckets(path: str | Path, dim: int | None = None) -> np.ndarray:
    """Bucket matrix from a bucket file; ids absent from the file stay zero."""
    path = str(path)
    num_buckets, bucket_dim, rows = _parse_rows(path)
    if dim is not None and bucket_dim != dim:
        raise ParseError(f"bucket dim {bucket_dim} differs from word-vector dim {dim}", path, 1)
    matrix = np.zeros((num_buckets, bucket_dim))
    for lineno, ident, vec in rows:
        try:
            idx = int(ident)
        except ValueError:
            raise ParseError(f"bucket id {ident!r} is not an integer", path, lineno) from None
        if not 0 <= idx < num_buckets:
            raise ParseError(f"bucket id {idx} outside [0, {num_buckets})", path, lineno)
        matrix[idx] = vec
    return matrix


def _format_row(ident: str, vec: np.ndarray) -> str:
    return ident + " " + " ".join(repr(float(x)) for x in vec) + "\n"


def save_vectors(table: WordVectorTable, path: str | Path) -> None:
    lines = [f"{len(table.word_vectors)} {table.dim}\n"]
    lines += [_format_row(w, v) for w, v in table.word_vectors.items()]
    Path(path).write_text("".join(lines), encoding="utf-8")


def save_buckets(matrix: np.ndarray, path: str | Path) -> None:
    lines = [f"{matrix.shape[0]} {matrix.shape[1]}\n"]
    lines += [_format_row(str(i), row) for i, row in enumerate(matrix)]
    Path(path).write_text("".join(lines), encoding="utf-8")

"""Embedding-similarity (Spearman) and KNN classification benchmarks.

An *embedder* is any callable mapping a sequence of texts to a ``[n, dim]``
float array.  :class:`EncoderEmbedder` and :class:`StaticEmbedder` adapt the
two model families in this package.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Callable, Hashable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .datasets import LabeledText, ScoredPair
from .encoder import EncoderModel
from .errors import ConfigError, DimensionError, InputError, UndefinedCorrelationError
from .losses import cosine
from .pooling import PoolingStrategy
from .static_embed import WordVectorTable, sentence_embed_avg
from .tensor import no_grad
from .trainer import embed_batch

Embedder = Callable[[Sequence[str]], np.ndarray]

DEFAULT_K_GRID = tuple(range(1, 32, 2))


class EncoderEmbedder:
    """Pooled encoder outputs, computed without recording a tape."""

    def __init__(self, model: EncoderModel, pooling: PoolingStrategy | str = PoolingStrategy.MEAN, batch_size: int = 64):
        self.model = model
        self.pooling = PoolingStrategy.parse(pooling)
        self.batch_size = batch_size

    def __call__(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.model.config.hidden_dim))
        chunks = []
        with no_grad():
            for start in range(0, len(texts), self.batch_size):
                chunk = texts[start : start + self.batch_size]
                chunks.append(embed_batch(self.model, chunk, self.pooling).data)
        return np.concatenate(chunks, axis=0)


class StaticEmbedder:
    """Averaged word vectors (the ``avg`` pooling of static models)."""

    def __init__(self, table: WordVectorTable):
        self.table = table

    def __call__(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.table.dim))
        return np.stack([sentence_embed_avg(self.table, t) for t in texts])


# --- rank correlation -------------------------------------------------------


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank span."""
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    start = 0
    while start < len(x):
        end = start + 1
        while end < len(x) and sorted_x[end] == sorted_x[start]:
            end += 1
        ranks[order[start:end]] = (start + 1 + end) / 2.0
        start = end
    return ranks


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("correlation is undefined when one input has zero variance")
    return float(np.clip((dx @ dy) / np.sqrt(sxx * syy), -1.0, 1.0))


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise InputError(f"spearman inputs differ in length: {x.size} vs {y.size}")
    if x.size < 2:
        raise InputError("spearman needs at least two observations")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise InputError("spearman inputs must be finite")
    return pearson(average_ranks(x), average_ranks(y))


def pair_cosines(embedder: Embedder, pairs: Sequence[tuple[str, str]]) -> list[float]:
    left = embedder([a for a, _ in pairs])
    right = embedder([b for _, b in pairs])
    return [cosine(u, v) for u, v in zip(left, right)]


def embedding_similarity_score(embedder: Embedder, pairs: Sequence[ScoredPair]) -> float:
    """Spearman correlation between embedding cosines and gold scores."""
    if len(pairs) < 2:
        raise InputError("embedding similarity needs at least two scored pairs")
    cos = pair_cosines(embedder, [(p.sentence1, p.sentence2) for p in pairs])
    return spearman(cos, [p.score for p in pairs])


# --- KNN --------------------------------------------------------------------


@dataclass(frozen=True)
class KnnConfig:
    p: float = 2.0
    k_grid: tuple[int, ...] = DEFAULT_K_GRID

    def __post_init__(self):
        object.__setattr__(self, "k_grid", tuple(int(k) for k in self.k_grid))
        if not self.p >= 1:
            raise ConfigError(f"Minkowski order p must be >= 1, got {self.p}")
        if not self.k_grid or any(k < 1 for k in self.k_grid):
            raise ConfigError(f"k_grid must hold positive integers, got {self.k_grid}")


def minkowski(a, b, p: float = 2.0) -> float:
    """``(sum |a_i - b_i|^p)^(1/p)``."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DimensionError(f"minkowski of vectors with {a.size} and {b.size} dims")
    if not p >= 1:
        raise InputError(f"Minkowski order p must be >= 1, got {p}")
    return float(_row_distances(a[None, :], b, p)[0])


def _row_distances(points: np.ndarray, query: np.ndarray, p: float) -> np.ndarray:
    diff = np.abs(points - query)
    if p == 1:
        return diff.sum(axis=1)
    if p == 2:
        return np.sqrt((diff * diff).sum(axis=1))
    return (diff**p).sum(axis=1) ** (1.0 / p)


def _vote(neighbor_labels: Sequence[Hashable]):
    counts = Counter(neighbor_labels)
    best = max(counts.values())
    for label in neighbor_labels:
        if counts[label] == best:
            return label
    raise AssertionError("unreachable")


def _check_train(train_x: np.ndarray, train_y: Sequence) -> np.ndarray:
    train_x = np.asarray(train_x, dtype=np.float64)
    if train_x.ndim != 2 or train_x.shape[0] == 0:
        raise InputError("KNN needs a non-empty [n, dim] training matrix")
    if len(train_y) != train_x.shape[0]:
        raise DimensionError(f"{len(train_y)} labels for {train_x.shape[0]} training rows")
    return train_x


def _neighbor_order(train_x: np.ndarray, query: np.ndarray, p: float) -> np.ndarray:
    query = np.asarray(query, dtype=np.float64).reshape(-1)
    if query.shape[0] != train_x.shape[1]:
        raise DimensionError(f"query has {query.shape[0]} dims, training rows have {train_x.shape[1]}")
    # Stable sort: equal distances keep training order, so the lower index wins.
    return np.argsort(_row_distances(train_x, query, p), kind="stable")


def knn_predict(train_x: np.ndarray, train_y: Sequence, query, k: int, p: float = 2.0):
    """Majority label of the ``k`` nearest training rows.

    Distance ties go to the lower training index; vote ties go to whichever
    tied label has the nearest neighbour.
    """
    train_x = _check_train(train_x, train_y)
    if not 1 <= k <= train_x.shape[0]:
        raise InputError(f"k={k} must be in [1, {train_x.shape[0]}]")
    order = _neighbor_order(train_x, query, p)[:k]
    return _vote([train_y[i] for i in order])


def _usable_grid(grid: Sequence[int], n_train: int) -> list[int]:
    usable = sorted({k for k in grid if k <= n_train})
    if not usable:
        raise InputError(f"no k in {tuple(grid)} fits a training set of {n_train}")
    return usable


def _accuracy_by_k(train_x, train_y, eval_x, eval_y, ks: Sequence[int], p: float) -> dict[int, float]:
    kmax = max(ks)
    hits = {k: 0 for k in ks}
    for query, truth in zip(eval_x, eval_y):
        neighbors = [train_y[i] for i in _neighbor_order(train_x, query, p)[:kmax]]
        for k in ks:
            hits[k] += _vote(neighbors[:k]) == truth
    return {k: hits[k] / len(eval_y) for k in ks}


def select_k(train_x, train_y, val_x, val_y, cfg: KnnConfig = KnnConfig()) -> tuple[int, float]:
    """Best ``k`` on the validation split; the smallest ``k`` wins ties.

    Grid values larger than the training set are skipped.
    """
    train_x = _check_train(train_x, train_y)
    val_x = np.asarray(val_x, dtype=np.float64)
    if len(val_y) == 0 or val_x.shape[0] != len(val_y):
        raise InputError("validation split must be non-empty with one label per row")
    ks = _usable_grid(cfg.k_grid, train_x.shape[0])
    acc = _accuracy_by_k(train_x, train_y, val_x, val_y, ks, cfg.p)
    best = ks[0]
    for k in ks:
        if acc[k] > acc[best]:
            best = k
    return best, acc[best]


def knn_accuracy(train_x, train_y, test_x, test_y, k: int, p: float = 2.0) -> float:
    train_x = _check_train(train_x, train_y)
    if len(test_y) == 0:
        raise InputError("test split is empty")
    return _accuracy_by_k(train_x, train_y, np.asarray(test_x, dtype=np.float64), test_y, [k], p)[k]


class ClassifyResult(NamedTuple):
    accuracy: float
    k: int


def classify_dataset(
    embedder: Embedder,
    train: Sequence[LabeledText],
    val: Sequence[LabeledText],
    test: Sequence[LabeledText],
    cfg: KnnConfig = KnnConfig(),
) -> ClassifyResult:
    """Embed each split, pick ``k`` on validation, report test accuracy."""
    if not train or not val or not test:
        raise InputError("classification needs non-empty train, validation and test splits")
    xs = [embedder([r.text for r in split]) for split in (train, val, test)]
    ys = [[r.label for r in split] for split in (train, val, test)]
    k, _ = select_k(xs[0], ys[0], xs[1], ys[1], cfg)
    return ClassifyResult(knn_accuracy(xs[0], ys[0], xs[2], ys[2], k, cfg.p), k)


# --- reports ------------------------------------------------------------------


@dataclass(frozen=True)
class PairCosine:
    text1: str
    text2: str
    cosine: float


def pairwise_cosine_report(embedder: Embedder, pairs: Sequence[tuple[str, str]]) -> list[PairCosine]:
    pairs = [(a, b) for a, b in pairs]
    if not pairs:
        return []
    return [PairCosine(a, b, c) for (a, b), c in zip(pairs, pair_cosines(embedder, pairs))]


@dataclass
class EvalReport:
    embedding_similarity: float | None = None
    accuracy: float | None = None
    chosen_k: int | None = None
    pairs: list[PairCosine] = field(default_factory=list)

    def __post_init__(self):
        if self.embedding_similarity is not None and not -1.0 <= self.embedding_similarity <= 1.0:
            raise InputError(f"embedding similarity {self.embedding_similarity} outside [-1, 1]")
        if self.accuracy is not None and not 0.0 <= self.accuracy <= 1.0:
            raise InputError(f"accuracy {self.accuracy} outside [0, 1]")

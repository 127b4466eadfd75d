"""Siamese training objectives: multiple-negatives ranking and cosine regression."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, DimensionError, InputError, NumericDomainError
from .tensor import Tensor

DEFAULT_MNRL_SCALE = 20.0
STS_SCORE_MAX = 5.0


@dataclass(frozen=True)
class LossConfig:
    mnrl_scale: float = DEFAULT_MNRL_SCALE
    sts_score_max: float = STS_SCORE_MAX

    def __post_init__(self):
        if not self.mnrl_scale > 0:
            raise ConfigError(f"mnrl_scale must be > 0, got {self.mnrl_scale}")
        if not self.sts_score_max > 0:
            raise ConfigError(f"sts_score_max must be > 0, got {self.sts_score_max}")


def cosine(a, b) -> float:
    """Cosine similarity of two vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DimensionError(f"cosine of vectors with shapes {a.shape} and {b.shape}")
    aa, bb = float(a @ a), float(b @ b)
    if aa == 0 or bb == 0:
        raise NumericDomainError("cosine similarity is undefined for a zero vector")
    # sqrt of the product keeps cosine(a, a) exactly 1
    return float(np.clip((a @ b) / np.sqrt(aa * bb), -1.0, 1.0))


def _check_rows(x: Tensor, what: str) -> None:
    norms = np.sqrt((x.data**2).sum(axis=1))
    bad = np.flatnonzero(~(norms > 0))
    if bad.size:
        raise NumericDomainError(f"{what} has zero-norm rows {bad.tolist()}")


def normalize_rows(x: Tensor) -> Tensor:
    return x / T.sqrt((x * x).sum(axis=1, keepdims=True))


def mnrl_loss(anchors: Tensor, positives: Tensor, hard_negatives: Tensor, scale: float = DEFAULT_MNRL_SCALE) -> Tensor:
    """Multiple-negatives ranking loss with one explicit hard negative per anchor.

    Anchor ``i`` is scored against all ``B`` positives followed by all ``B``
    hard negatives (``2B`` candidates); logits are ``scale * cosine`` and the
    loss is the mean cross-entropy with target column ``i``.
    """
    if not (anchors.ndim == positives.ndim == hard_negatives.ndim == 2):
        raise DimensionError("mnrl_loss expects [B, h] inputs")
    if not (anchors.shape == positives.shape == hard_negatives.shape):
        raise DimensionError(
            f"mnrl_loss shape mismatch: {anchors.shape}, {positives.shape}, {hard_negatives.shape}"
        )
    for x, what in ((anchors, "anchors"), (positives, "positives"), (hard_negatives, "hard_negatives")):
        _check_rows(x, what)
    b = anchors.shape[0]
    candidates = T.concat([normalize_rows(positives), normalize_rows(hard_negatives)], axis=0)
    logits = (normalize_rows(anchors) @ candidates.transpose(1, 0)) * float(scale)
    logp = T.log_softmax(logits, axis=1)
    rows = np.arange(b)
    return -(logp[rows, rows].mean())


def cosine_similarity_loss(u: Tensor, v: Tensor, gold: Sequence[float], score_max: float = STS_SCORE_MAX) -> Tensor:
    """Mean squared error between row cosines and ``gold / score_max``."""
    if u.ndim != 2 or u.shape != v.shape:
        raise DimensionError(f"cosine_similarity_loss shape mismatch: {u.shape} vs {v.shape}")
    gold = np.asarray(gold, dtype=np.float64).reshape(-1)
    if gold.shape[0] != u.shape[0]:
        raise DimensionError(f"{gold.shape[0]} gold scores for {u.shape[0]} pairs")
    out_of_range = np.flatnonzero(~((gold >= 0) & (gold <= score_max)))
    if out_of_range.size:
        i = int(out_of_range[0])
        raise InputError(f"gold score {gold[i]} at index {i} outside [0, {score_max}]")
    _check_rows(u, "u")
    _check_rows(v, "v")
    cos = (normalize_rows(u) * normalize_rows(v)).sum(axis=1)
    diff = cos - gold / score_max
    return (diff * diff).mean()

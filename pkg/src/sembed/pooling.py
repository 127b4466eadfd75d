"""Token-to-sentence pooling: CLS, masked MEAN, masked MAX."""

from __future__ import annotations

import enum

import numpy as np

from .errors import DimensionError, InputError
from .tensor import Tensor, custom_op


class PoolingStrategy(enum.Enum):
    CLS = "cls"
    MEAN = "mean"
    MAX = "max"

    @classmethod
    def parse(cls, name: "str | PoolingStrategy") -> "PoolingStrategy":
        if isinstance(name, PoolingStrategy):
            return name
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise InputError(f"unknown pooling strategy {name!r}; expected cls, mean or max") from None

    def __str__(self) -> str:
        return self.value


def _effective_mask(mask: np.ndarray, include_special: bool) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.int64)
    if include_special:
        return mask
    # Drop [CLS] (position 0) and [SEP] (last real position) from each row.
    out = mask.copy()
    out[:, 0] = 0
    last = mask.sum(axis=1) - 1
    out[np.arange(mask.shape[0]), np.maximum(last, 0)] = 0
    return out


def pool(
    hidden: Tensor,
    mask: np.ndarray,
    strategy: PoolingStrategy | str,
    include_special: bool = True,
) -> Tensor:
    """Reduce ``hidden`` ``[B, T, h]`` to ``[B, h]``.

    Masked-off positions never influence the result: MEAN sums positions
    sequentially so trailing zeros leave the sum bit-identical, and MAX
    substitutes ``-inf`` before reducing.  With ``include_special=False`` the
    [CLS] and [SEP] positions are excluded from MEAN and MAX.
    """
    strategy = PoolingStrategy.parse(strategy)
    if hidden.ndim != 3:
        raise DimensionError(f"pool expects [B, T, h] hidden states, got {hidden.shape}")
    mask = np.asarray(mask)
    if mask.shape != hidden.shape[:2]:
        raise DimensionError(f"mask shape {mask.shape} does not match hidden {hidden.shape}")
    empty = np.flatnonzero(mask.sum(axis=1) < 1)
    if empty.size:
        raise InputError(f"rows {empty.tolist()} have an all-zero mask")
    if strategy is PoolingStrategy.CLS:
        return hidden[:, 0, :]

    eff = _effective_mask(mask, include_special)
    counts = eff.sum(axis=1)
    if (counts < 1).any():
        rows = np.flatnonzero(counts < 1).tolist()
        raise InputError(f"rows {rows} have no positions to pool over")
    h = hidden.data
    m = eff[:, :, None].astype(np.float64)

    if strategy is PoolingStrategy.MEAN:
        total = np.cumsum(np.where(m > 0, h, 0.0), axis=1)[:, -1, :]
        denom = counts[:, None].astype(np.float64)
        return custom_op("pool_mean", total / denom, (hidden,), lambda g: (g[:, None, :] * m / denom[:, None, :],))

    masked = np.where(m > 0, h, -np.inf)
    # argmax returns the first maximal index: ties route to the lowest position.
    idx = masked.argmax(axis=1)
    out = np.take_along_axis(h, idx[:, None, :], axis=1)[:, 0, :]

    def grad(g):
        full = np.zeros_like(h)
        np.put_along_axis(full, idx[:, None, :], g[:, None, :], axis=1)
        return (full,)

    return custom_op("pool_max", out, (hidden,), grad)

"""AdamW with linear warmup/decay and the three siamese training setups."""

from __future__ import annotations

import csv
import enum
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import ScoredPair, TripletExample
from .encoder import EncoderModel, forward
from .errors import ConfigError, DimensionError, InputError, TrainingError
from .losses import LossConfig, cosine_similarity_loss, mnrl_loss
from .pooling import PoolingStrategy, pool
from .tensor import Tape, Tensor, backward
from .tokenizer import encode_batch


class Setup(enum.Enum):
    NLI = "nli"
    STS = "sts"
    TWO_STEP = "two-step"

    @classmethod
    def parse(cls, name: "str | Setup") -> "Setup":
        if isinstance(name, Setup):
            return name
        key = name.strip().lower().replace("_", "-")
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown setup {name!r}; expected nli, sts or two-step") from None


@dataclass(frozen=True)
class TrainConfig:
    setup: Setup = Setup.TWO_STEP
    epochs_nli: int = 1
    batch_nli: int = 4
    epochs_sts: int = 4
    batch_sts_single: int = 8
    batch_sts_two_step: int = 8
    learning_rate: float = 2e-5
    warmup_fraction: float = 0.1
    weight_decay: float = 0.01
    seed: int = 0
    pooling: PoolingStrategy = PoolingStrategy.MEAN
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        object.__setattr__(self, "setup", Setup.parse(self.setup))
        object.__setattr__(self, "pooling", PoolingStrategy.parse(self.pooling))
        problems = []
        for name in ("epochs_nli", "batch_nli", "epochs_sts", "batch_sts_single", "batch_sts_two_step"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                problems.append(f"{name} must be a positive integer (got {value!r})")
        if not self.learning_rate > 0:
            problems.append(f"learning_rate must be > 0 (got {self.learning_rate})")
        if not 0.0 <= self.warmup_fraction < 1.0:
            problems.append(f"warmup_fraction must be in [0, 1) (got {self.warmup_fraction})")
        if self.weight_decay < 0:
            problems.append(f"weight_decay must be >= 0 (got {self.weight_decay})")
        if problems:
            raise ConfigError("invalid train config: " + "; ".join(problems))


@dataclass
class AdamWState:
    first: list[np.ndarray]
    second: list[np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: Sequence[Tensor]) -> "AdamWState":
        return cls([np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params])


def adamw_step(
    params: Sequence[Tensor],
    grads: Sequence[np.ndarray],
    state: AdamWState,
    lr_t: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """Decoupled weight decay, then a bias-corrected Adam update, in place."""
    if not (len(params) == len(grads) == len(state.first) == len(state.second)):
        raise DimensionError("params, grads and optimizer state have different lengths")
    for p, g, m in zip(params, grads, state.first):
        if p.shape != np.shape(g) or p.shape != m.shape:
            raise DimensionError(f"shape mismatch in adamw_step: param {p.shape}, grad {np.shape(g)}")
    b1, b2 = betas
    state.step += 1
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.first, state.second):
        if weight_decay:
            p.data -= lr_t * weight_decay * p.data
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= lr_t * (m / c1) / (np.sqrt(v / c2) + eps)


def lr_schedule(step: int, total_steps: int, base_lr: float, warmup_fraction: float) -> float:
    """Linear warmup over ``ceil(warmup_fraction * total)`` steps, then linear decay to 0."""
    if not 0 <= step <= total_steps:
        raise InputError(f"step {step} outside [0, {total_steps}]")
    warmup = math.ceil(warmup_fraction * total_steps)
    if step < warmup:
        return base_lr * step / warmup
    if total_steps == warmup:
        return base_lr
    return base_lr * (total_steps - step) / (total_steps - warmup)


@dataclass
class TrainResult:
    model: EncoderModel
    losses: list[float]


@dataclass
class TwoStepResult:
    model: EncoderModel
    nli_losses: list[float]
    sts_losses: list[float]


def embed_batch(model: EncoderModel, texts: Sequence[str], pooling: PoolingStrategy) -> Tensor:
    """Encode and pool ``texts`` into ``[B, h]`` (recorded on the active tape)."""
    if model.vocab is None:
        raise InputError("model has no vocabulary attached")
    batch = encode_batch(texts, model.vocab, model.config.max_len)
    return pool(forward(model, batch), batch.mask, pooling)


def _run(
    model: EncoderModel,
    records: Sequence,
    epochs: int,
    batch_size: int,
    cfg: TrainConfig,
    loss_fn: Callable[[EncoderModel, list], Tensor],
    on_step: Callable[[int, float], None] | None,
) -> TrainResult:
    if not records:
        raise InputError("training dataset is empty")
    per_epoch = len(records) // batch_size
    if per_epoch == 0:
        raise InputError(f"{len(records)} examples cannot fill one batch of {batch_size}")
    model = model.copy()
    params = model.parameters()
    for p in params:
        p.requires_grad = True
    state = AdamWState.for_params(params)
    total = epochs * per_epoch
    rng = np.random.default_rng(cfg.seed)
    losses = []
    step = 0
    for _ in range(epochs):
        order = rng.permutation(len(records))
        for start in range(0, per_epoch * batch_size, batch_size):
            chunk = [records[i] for i in order[start : start + batch_size]]
            model.zero_grad()
            with Tape():
                loss = loss_fn(model, chunk)
                backward(loss)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingError(f"non-finite loss {value} at step {step}")
            lr_t = lr_schedule(step, total, cfg.learning_rate, cfg.warmup_fraction)
            grads = [np.zeros_like(p.data) if p.grad is None else p.grad for p in params]
            adamw_step(params, grads, state, lr_t, weight_decay=cfg.weight_decay)
            if not all(np.isfinite(p.data).all() for p in params):
                raise TrainingError(f"non-finite parameter after step {step}")
            losses.append(value)
            step += 1
            if on_step is not None:
                on_step(step, value)
    model.zero_grad()
    return TrainResult(model, losses)


def train_nli(
    model: EncoderModel,
    triplets: Sequence[TripletExample],
    cfg: TrainConfig,
    on_step: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Siamese MNRL training on (anchor, positive, negative) triplets; returns a new model."""
    scale = cfg.loss.mnrl_scale

    def loss_fn(m, chunk):
        a = embed_batch(m, [t.anchor for t in chunk], cfg.pooling)
        p = embed_batch(m, [t.positive for t in chunk], cfg.pooling)
        n = embed_batch(m, [t.negative for t in chunk], cfg.pooling)
        return mnrl_loss(a, p, n, scale)

    return _run(model, triplets, cfg.epochs_nli, cfg.batch_nli, cfg, loss_fn, on_step)


def train_sts(
    model: EncoderModel,
    pairs: Sequence[ScoredPair],
    cfg: TrainConfig,
    batch_size: int | None = None,
    on_step: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Siamese cosine-regression training on scored pairs; returns a new model."""
    batch_size = batch_size or cfg.batch_sts_single
    score_max = cfg.loss.sts_score_max

    def loss_fn(m, chunk):
        u = embed_batch(m, [p.sentence1 for p in chunk], cfg.pooling)
        v = embed_batch(m, [p.sentence2 for p in chunk], cfg.pooling)
        return cosine_similarity_loss(u, v, [p.score for p in chunk], score_max)

    return _run(model, pairs, cfg.epochs_sts, batch_size, cfg, loss_fn, on_step)


def train_two_step(
    model: EncoderModel,
    triplets: Sequence[TripletExample],
    pairs: Sequence[ScoredPair],
    cfg: TrainConfig,
    on_step: Callable[[int, float], None] | None = None,
) -> TwoStepResult:
    """NLI pre-training followed by STS fine-tuning with a fresh optimizer."""
    if not triplets or not pairs:
        raise InputError("two-step training needs both triplets and scored pairs")
    first = train_nli(model, triplets, cfg, on_step)
    second = train_sts(first.model, pairs, cfg, cfg.batch_sts_two_step, on_step)
    return TwoStepResult(second.model, first.losses, second.losses)


def write_loss_trace(path: str | Path, losses: Sequence[float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "loss"])
        for i, value in enumerate(losses, start=1):
            writer.writerow([i, repr(float(value))])

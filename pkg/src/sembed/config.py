"""Plain-text ``key = value`` run configuration.

Lines starting with ``#`` and blank lines are ignored.  Every key must appear
in :data:`SCHEMA`; unknown keys are errors.  Values given with ``--set`` or
dedicated CLI flags override the file.
"""

from __future__ import annotations

import os
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

from .encoder import EncoderConfig
from .errors import ConfigError, ParseError
from .evaluation import DEFAULT_K_GRID, KnnConfig
from .losses import LossConfig
from .pooling import PoolingStrategy
from .trainer import Setup, TrainConfig

SEED_ENV = "SEMBED_SEED"


def _int(text: str) -> int:
    return int(text)


def _float(text: str) -> float:
    return float(text)


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


SCHEMA: dict[str, Callable[[str], object]] = {
    # encoder
    "vocab_size": _int,
    "hidden_dim": _int,
    "num_layers": _int,
    "num_heads": _int,
    "ff_dim": _int,
    "max_len": _int,
    # training
    "setup": Setup.parse,
    "epochs_nli": _int,
    "batch_nli": _int,
    "epochs_sts": _int,
    "batch_sts_single": _int,
    "batch_sts_two_step": _int,
    "learning_rate": _float,
    "warmup_fraction": _float,
    "weight_decay": _float,
    "pooling": PoolingStrategy.parse,
    # losses
    "mnrl_scale": _float,
    "sts_score_max": _float,
    # knn
    "knn_p": _float,
    "k_grid": _int_list,
    # paths
    "nli": str,
    "sts": str,
    "out": str,
    "init": str,
    "loss_csv": str,
    # randomness
    "seed": _int,
}

ENCODER_KEYS = ("vocab_size", "hidden_dim", "num_layers", "num_heads", "ff_dim", "max_len")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"expected 'key = value', got {stripped!r}", source, lineno)
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in SCHEMA:
            raise ParseError(f"unknown config key {key!r}", source, lineno)
        raw[key] = value
    return raw


def load_config_file(path: str | Path) -> dict[str, str]:
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text, path)


def parse_overrides(pairs: list[str] | None) -> dict[str, str]:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = value
    return out


@dataclass
class RunConfig:
    """Validated merge of encoder, training, loss and KNN settings plus paths."""

    encoder: EncoderConfig
    train: TrainConfig
    knn: KnnConfig
    paths: dict[str, str] = field(default_factory=dict)
    explicit: frozenset[str] = frozenset()

    @property
    def seed(self) -> int:
        return self.train.seed

    @classmethod
    def from_raw(cls, raw: Mapping[str, str], seed: int | None = None) -> "RunConfig":
        values = {}
        for key, text in raw.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                values[key] = SCHEMA[key](text)
            except (ValueError, ConfigError) as exc:
                raise ConfigError(f"bad value for {key!r}: {text!r} ({exc})") from None
        root = resolve_seed(seed, values.get("seed"))
        enc_kwargs = {k: values[k] for k in ENCODER_KEYS if k in values}
        encoder = EncoderConfig(**enc_kwargs, seed=root)
        encoder.validate()
        loss = LossConfig(
            mnrl_scale=values.get("mnrl_scale", LossConfig.mnrl_scale),
            sts_score_max=values.get("sts_score_max", LossConfig.sts_score_max),
        )
        train_keys = (
            "setup", "epochs_nli", "batch_nli", "epochs_sts", "batch_sts_single",
            "batch_sts_two_step", "learning_rate", "warmup_fraction", "weight_decay", "pooling",
        )
        train = TrainConfig(**{k: values[k] for k in train_keys if k in values}, seed=root, loss=loss)
        knn = KnnConfig(p=values.get("knn_p", 2.0), k_grid=values.get("k_grid", DEFAULT_K_GRID))
        paths = {k: values[k] for k in ("nli", "sts", "out", "init", "loss_csv") if k in values}
        return cls(encoder, train, knn, paths, frozenset(values))


def resolve_seed(flag: int | None, configured: int | None) -> int:
    """``--seed`` beats the config file, which beats ``$SEMBED_SEED``; default 0."""
    if flag is not None:
        return flag
    if configured is not None:
        return configured
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return 0

"""Small pre-norm transformer encoder and its binary checkpoint format.

Checkpoint layout (all integers little-endian)::

    b"SEMB"  u32 version=1  u32 header_len  header (UTF-8 JSON)
    repeat for each parameter in canonical order:
        u16 name_len  name  u8 ndim  u32 dims[ndim]  f64 data (row-major, LE)

The JSON header holds the ``EncoderConfig`` fields and, when the model carries
one, a ``"vocab"`` list of the non-reserved tokens in id order.

Canonical parameter order (see :func:`parameter_names`)::

    embed.token  embed.position
    layers.{i}.ln1.gain  layers.{i}.ln1.bias
    layers.{i}.attn.{wq,bq,wk,bk,wv,bv,wo,bo}
    layers.{i}.ln2.gain  layers.{i}.ln2.bias
    layers.{i}.ffn.{w1,b1,w2,b2}
    final_ln.gain  final_ln.bias
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import tensor as T
from .errors import (
    BadMagicError,
    CheckpointError,
    ConfigError,
    InputError,
    TruncatedCheckpointError,
    VersionMismatchError,
)
from .tensor import Tensor
from .tokenizer import TokenBatch, Vocabulary

MAGIC = b"SEMB"
VERSION = 1
INIT_STD = 0.02
LN_EPS = 1e-12
MASK_NEG = -1e9


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int = 1000
    hidden_dim: int = 32
    num_layers: int = 2
    num_heads: int = 4
    ff_dim: int = 64
    max_len: int = 32
    seed: int = 0

    def violations(self) -> list[str]:
        problems = []
        for name in ("vocab_size", "hidden_dim", "num_layers", "num_heads", "ff_dim"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                problems.append(f"{name} must be an integer >= 1 (got {value!r})")
        if not isinstance(self.max_len, int) or self.max_len < 3:
            problems.append(f"max_len must be an integer >= 3 (got {self.max_len!r})")
        if (
            isinstance(self.hidden_dim, int)
            and isinstance(self.num_heads, int)
            and self.num_heads >= 1
            and self.hidden_dim % self.num_heads
        ):
            problems.append(
                f"hidden_dim ({self.hidden_dim}) must be divisible by num_heads ({self.num_heads})"
            )
        if not isinstance(self.seed, int):
            problems.append(f"seed must be an integer (got {self.seed!r})")
        return problems

    def validate(self) -> None:
        problems = self.violations()
        if problems:
            raise ConfigError("invalid encoder config: " + "; ".join(problems))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "EncoderConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(raw) - names
        if unknown:
            raise ConfigError(f"unknown encoder config keys: {sorted(unknown)}")
        return cls(**raw)

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.num_heads


def parameter_shapes(config: EncoderConfig) -> dict[str, tuple[int, ...]]:
    """Parameter names mapped to shapes, in canonical order."""
    h, f = config.hidden_dim, config.ff_dim
    shapes: dict[str, tuple[int, ...]] = {
        "embed.token": (config.vocab_size, h),
        "embed.position": (config.max_len, h),
    }
    for i in range(config.num_layers):
        p = f"layers.{i}."
        shapes[p + "ln1.gain"] = (h,)
        shapes[p + "ln1.bias"] = (h,)
        for w in ("q", "k", "v", "o"):
            shapes[p + f"attn.w{w}"] = (h, h)
            shapes[p + f"attn.b{w}"] = (h,)
        shapes[p + "ln2.gain"] = (h,)
        shapes[p + "ln2.bias"] = (h,)
        shapes[p + "ffn.w1"] = (h, f)
        shapes[p + "ffn.b1"] = (f,)
        shapes[p + "ffn.w2"] = (f, h)
        shapes[p + "ffn.b2"] = (h,)
    shapes["final_ln.gain"] = (h,)
    shapes["final_ln.bias"] = (h,)
    return shapes


def parameter_names(config: EncoderConfig) -> list[str]:
    return list(parameter_shapes(config))


class EncoderModel:
    """Weights of the encoder; ``params`` preserves canonical order."""

    def __init__(self, config: EncoderConfig, params: dict[str, Tensor], vocab: Vocabulary | None = None):
        expected = parameter_shapes(config)
        if list(params) != list(expected):
            raise InputError("parameter names do not match the canonical layout for this config")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise InputError(f"parameter {name} has shape {params[name].shape}, expected {shape}")
        if vocab is not None and vocab.size > config.vocab_size:
            raise InputError(f"vocabulary of {vocab.size} tokens exceeds vocab_size {config.vocab_size}")
        self.config = config
        self.params = params
        self.vocab = vocab

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "EncoderModel":
        params = {name: Tensor(p.data, requires_grad=p.requires_grad) for name, p in self.params.items()}
        return EncoderModel(self.config, params, self.vocab)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def forward(self, batch: TokenBatch) -> Tensor:
        return forward(self, batch)


def init(config: EncoderConfig, vocab: Vocabulary | None = None) -> EncoderModel:
    """Seeded N(0, 0.02) weights, zero biases, unit layer-norm gains."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    params = {}
    for name, shape in parameter_shapes(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "gain":
            data = np.ones(shape)
        elif leaf == "bias" or leaf.startswith("b"):
            data = np.zeros(shape)
        else:
            data = rng.normal(0.0, INIT_STD, size=shape)
        params[name] = Tensor(data, requires_grad=True)
    return EncoderModel(config, params, vocab)


def _split_heads(x: Tensor, b: int, t: int, heads: int, dim: int) -> Tensor:
    return x.reshape(b, t, heads, dim).transpose(0, 2, 1, 3)


def forward(model: EncoderModel, batch: TokenBatch) -> Tensor:
    """Token-level hidden states ``[B, T, h]`` for a padded batch."""
    cfg = model.config
    p = model.params
    ids = np.asarray(batch.ids)
    b, t = ids.shape
    if t > cfg.max_len:
        raise InputError(f"batch width {t} exceeds max_len {cfg.max_len}")
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
        raise InputError(f"token id out of range [0, {cfg.vocab_size})")
    heads, dim = cfg.num_heads, cfg.head_dim

    x = T.embedding(p["embed.token"], ids) + p["embed.position"][:t]
    # Additive key mask, broadcast over heads and query positions.
    key_bias = ((1.0 - np.asarray(batch.mask, dtype=np.float64)) * MASK_NEG)[:, None, None, :]
    scale = 1.0 / math.sqrt(dim)
    for i in range(cfg.num_layers):
        pre = f"layers.{i}."
        hx = T.layer_norm(x, p[pre + "ln1.gain"], p[pre + "ln1.bias"], LN_EPS)
        q = _split_heads(hx @ p[pre + "attn.wq"] + p[pre + "attn.bq"], b, t, heads, dim)
        k = _split_heads(hx @ p[pre + "attn.wk"] + p[pre + "attn.bk"], b, t, heads, dim)
        v = _split_heads(hx @ p[pre + "attn.wv"] + p[pre + "attn.bv"], b, t, heads, dim)
        scores = (q @ k.transpose(0, 1, 3, 2)) * scale + key_bias
        ctx = T.softmax(scores, axis=-1) @ v
        ctx = ctx.transpose(0, 2, 1, 3).reshape(b, t, cfg.hidden_dim)
        x = x + (ctx @ p[pre + "attn.wo"] + p[pre + "attn.bo"])
        hx = T.layer_norm(x, p[pre + "ln2.gain"], p[pre + "ln2.bias"], LN_EPS)
        ff = T.gelu(hx @ p[pre + "ffn.w1"] + p[pre + "ffn.b1"])
        x = x + (ff @ p[pre + "ffn.w2"] + p[pre + "ffn.b2"])
    return T.layer_norm(x, p["final_ln.gain"], p["final_ln.bias"], LN_EPS)


def _header(config: EncoderConfig, vocab: Vocabulary | None) -> bytes:
    doc = config.to_dict()
    if vocab is not None:
        doc["vocab"] = list(vocab.tokens)
    return json.dumps(doc, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def checkpoint_bytes(model: EncoderModel, config: EncoderConfig | None = None) -> bytes:
    config = config or model.config
    if config != model.config:
        raise InputError("config does not match the model being saved")
    header = _header(config, model.vocab)
    parts = [MAGIC, struct.pack("<II", VERSION, len(header)), header]
    for name, param in model.params.items():
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", param.ndim))
        parts.append(struct.pack(f"<{param.ndim}I", *param.shape))
        parts.append(np.ascontiguousarray(param.data, dtype="<f8").tobytes())
    return b"".join(parts)


def save_checkpoint(model: EncoderModel, config: EncoderConfig | None, path: str | Path) -> None:
    Path(path).write_bytes(checkpoint_bytes(model, config))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedCheckpointError(
                f"checkpoint truncated while reading {what} at byte {self.pos}"
            )
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def parse_checkpoint(buf: bytes) -> tuple[EncoderModel, EncoderConfig]:
    r = _Reader(buf)
    if len(buf) < len(MAGIC) and MAGIC.startswith(buf):
        raise TruncatedCheckpointError(f"checkpoint truncated to {len(buf)} bytes")
    if buf[:4] != MAGIC:
        raise BadMagicError(f"not a checkpoint: magic {buf[:4]!r} != {MAGIC!r}")
    r.pos = 4
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise VersionMismatchError(f"checkpoint version {version}, this build reads {VERSION}")
    (hlen,) = r.unpack("<I", "header length")
    try:
        doc = json.loads(r.take(hlen, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    tokens = doc.pop("vocab", None)
    try:
        config = EncoderConfig.from_dict(doc)
        config.validate()
    except (ConfigError, TypeError) as exc:
        raise CheckpointError(f"invalid config in checkpoint: {exc}") from exc
    vocab = Vocabulary(tuple(tokens)) if tokens is not None else None

    params = {}
    for name, shape in parameter_shapes(config).items():
        (nlen,) = r.unpack("<H", "parameter name length")
        got = r.take(nlen, "parameter name").decode("utf-8", errors="replace")
        if got != name:
            raise CheckpointError(f"expected parameter {name!r}, found {got!r}")
        (ndim,) = r.unpack("<B", f"{name} ndim")
        dims = r.unpack(f"<{ndim}I", f"{name} dims")
        if tuple(dims) != shape:
            raise CheckpointError(f"parameter {name} has shape {dims}, expected {shape}")
        count = math.prod(dims)
        data = np.frombuffer(r.take(8 * count, f"{name} data"), dtype="<f8").reshape(dims)
        params[name] = Tensor(data.astype(np.float64), requires_grad=True)
    if r.pos != len(buf):
        raise CheckpointError(f"{len(buf) - r.pos} trailing bytes after last parameter")
    return EncoderModel(config, params, vocab), config


def load_checkpoint(path: str | Path) -> tuple[EncoderModel, EncoderConfig]:
    return parse_checkpoint(Path(path).read_bytes())

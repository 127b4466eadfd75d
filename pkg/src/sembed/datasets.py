"""Record types, JSON Lines loaders/serializers and the synthetic topic corpus."""

from __future__ import annotations

import json
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Generic, TypeVar

import numpy as np

from .errors import ConfigError, InputError, ParseError

SCORE_MIN, SCORE_MAX = 0.0, 5.0


@dataclass(frozen=True)
class TripletExample:
    anchor: str
    positive: str
    negative: str

    def __post_init__(self):
        for name in ("anchor", "positive", "negative"):
            _require_text(getattr(self, name), name)


@dataclass(frozen=True)
class ScoredPair:
    sentence1: str
    sentence2: str
    score: float

    def __post_init__(self):
        _require_text(self.sentence1, "sentence1")
        _require_text(self.sentence2, "sentence2")
        if isinstance(self.score, bool) or not isinstance(self.score, (int, float)):
            raise InputError(f"score must be a number, got {type(self.score).__name__}")
        if not (SCORE_MIN <= self.score <= SCORE_MAX):
            raise InputError(f"score {self.score} outside [{SCORE_MIN:g}, {SCORE_MAX:g}]")
        object.__setattr__(self, "score", float(self.score))


@dataclass(frozen=True)
class LabeledText:
    text: str
    label: str

    def __post_init__(self):
        _require_text(self.text, "text")
        _require_text(self.label, "label")


def _require_text(value, name: str) -> None:
    if not isinstance(value, str):
        raise InputError(f"{name} must be a string, got {type(value).__name__}")
    if not value:
        raise InputError(f"{name} must be non-empty")


R = TypeVar("R")


@dataclass(frozen=True)
class DatasetSplit(Generic[R]):
    train: tuple[R, ...]
    validation: tuple[R, ...]
    test: tuple[R, ...]


_KEYS: dict[type, tuple[str, ...]] = {
    TripletExample: ("anchor", "positive", "negative"),
    ScoredPair: ("sentence1", "sentence2", "score"),
    LabeledText: ("text", "label"),
}


def _load_jsonl(path: str | Path, build: Callable[[dict], R], keys: Sequence[str]) -> list[R]:
    path = str(path)
    records = []
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ParseError(f"invalid UTF-8 ({exc.reason})", path, lineno) from None
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path, lineno) from None
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", path, lineno)
            missing = [k for k in keys if k not in obj]
            if missing:
                raise ParseError(f"missing key(s) {missing}", path, lineno)
            try:
                records.append(build(obj))
            except InputError as exc:
                raise ParseError(str(exc), path, lineno) from None
    return records


def load_triplets(path: str | Path) -> list[TripletExample]:
    return _load_jsonl(
        path, lambda o: TripletExample(o["anchor"], o["positive"], o["negative"]), _KEYS[TripletExample]
    )


def load_scored_pairs(path: str | Path) -> list[ScoredPair]:
    return _load_jsonl(
        path, lambda o: ScoredPair(o["sentence1"], o["sentence2"], o["score"]), _KEYS[ScoredPair]
    )


def load_labeled(path: str | Path) -> list[LabeledText]:
    return _load_jsonl(path, lambda o: LabeledText(o["text"], o["label"]), _KEYS[LabeledText])


def load_text_pairs(path: str | Path) -> list[tuple[str, str]]:
    """Sentence pairs for cosine reports; a ``score`` key is allowed and ignored."""

    def build(o):
        _require_text(o["sentence1"], "sentence1")
        _require_text(o["sentence2"], "sentence2")
        return (o["sentence1"], o["sentence2"])

    return _load_jsonl(path, build, ("sentence1", "sentence2"))


def to_jsonl(records: Iterable) -> str:
    """Canonical serialization: sorted keys, UTF-8 text, one record per line."""
    lines = []
    for rec in records:
        lines.append(json.dumps(asdict(rec), sort_keys=True, ensure_ascii=False))
    return "".join(line + "\n" for line in lines)


def dump_jsonl(records: Iterable, path: str | Path) -> None:
    Path(path).write_text(to_jsonl(records), encoding="utf-8")


# --- synthetic topic corpus -------------------------------------------------

_ONSETS = ("b", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "sh", "th")
_VOWELS = ("a", "e", "i", "o", "u", "ai", "ou")


@dataclass(frozen=True)
class SynthSpec:
    """Shape of a synthetic corpus: topic vocabularies plus a shared filler vocabulary."""

    num_topics: int = 2
    words_per_topic: int = 12
    filler_words: int = 8
    filler_rate: float = 0.3
    min_words: int = 4
    max_words: int = 8
    n_triplets: int = 512
    n_pairs: int = 500
    n_labeled: int = 300
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0

    def validate(self) -> None:
        problems = []
        if self.num_topics < 2:
            problems.append("num_topics must be >= 2")
        for name in ("words_per_topic", "min_words", "n_triplets", "n_pairs", "n_labeled"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if self.filler_words < 0:
            problems.append("filler_words must be >= 0")
        if not 0.0 <= self.filler_rate < 1.0:
            problems.append("filler_rate must be in [0, 1)")
        if self.filler_words == 0 and self.filler_rate > 0:
            problems.append("filler_rate > 0 needs filler_words > 0")
        if self.max_words < self.min_words:
            problems.append("max_words must be >= min_words")
        if len(self.split) != 3 or any(f < 0 for f in self.split) or not math.isclose(sum(self.split), 1.0):
            problems.append("split must be three non-negative fractions summing to 1")
        if problems:
            raise ConfigError("invalid synthetic spec: " + "; ".join(problems))


@dataclass
class SynthData:
    topics: list[list[str]]
    fillers: list[str]
    triplets: list[TripletExample]
    pairs: list[ScoredPair]
    labeled: DatasetSplit[LabeledText]
    triplet_topics: list[tuple[int, int]] = field(default_factory=list)


def jaccard_gold(s1: str, s2: str) -> float:
    """``5 * Jaccard(word sets)`` rounded to the nearest 0.5."""
    a, b = set(s1.split()), set(s2.split())
    j = len(a & b) / len(a | b)
    return math.floor(j * 10 + 0.5) / 2


class _Sampler:
    def __init__(self, spec: SynthSpec):
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)
        words = self._unique_words(spec.num_topics * spec.words_per_topic + spec.filler_words)
        k = spec.words_per_topic
        self.topics = [words[i * k : (i + 1) * k] for i in range(spec.num_topics)]
        self.fillers = words[spec.num_topics * k :]

    def _unique_words(self, n: int) -> list[str]:
        seen: set[str] = set()
        out = []
        while len(out) < n:
            syllables = int(self.rng.integers(2, 4))
            word = "".join(
                _ONSETS[self.rng.integers(len(_ONSETS))] + _VOWELS[self.rng.integers(len(_VOWELS))]
                for _ in range(syllables)
            )
            if word not in seen:
                seen.add(word)
                out.append(word)
        return out

    def word(self, topic: int) -> str:
        if self.fillers and self.rng.random() < self.spec.filler_rate:
            return self.fillers[self.rng.integers(len(self.fillers))]
        vocab = self.topics[topic]
        return vocab[self.rng.integers(len(vocab))]

    def sentence(self, topic: int) -> str:
        n = int(self.rng.integers(self.spec.min_words, self.spec.max_words + 1))
        return " ".join(self.word(topic) for _ in range(n))

    def other_topic(self, topic: int) -> int:
        other = int(self.rng.integers(self.spec.num_topics - 1))
        return other + (other >= topic)

    def variant(self, s1: str, topic: int) -> str:
        keep = self.rng.random()
        drift = self.rng.random()
        out = []
        for w in s1.split():
            if self.rng.random() < keep:
                out.append(w)
            elif self.rng.random() < drift:
                out.append(self.word(self.other_topic(topic)))
            else:
                out.append(self.word(topic))
        return " ".join(out)


def synth_generate(spec: SynthSpec = SynthSpec()) -> SynthData:
    """Seeded synthetic NLI triplets, graded STS pairs and topic-labelled texts.

    Triplets pair two same-topic sentences with a different-topic negative.
    Pair ``sentence2`` is a perturbed copy of ``sentence1`` (random keep rate,
    replacements drawn from the same or another topic) and is scored by
    :func:`jaccard_gold`.
    """
    spec.validate()
    s = _Sampler(spec)
    triplets, triplet_topics = [], []
    for _ in range(spec.n_triplets):
        t = int(s.rng.integers(spec.num_topics))
        neg_t = s.other_topic(t)
        triplets.append(TripletExample(s.sentence(t), s.sentence(t), s.sentence(neg_t)))
        triplet_topics.append((t, neg_t))

    pairs = []
    for _ in range(spec.n_pairs):
        t = int(s.rng.integers(spec.num_topics))
        s1 = s.sentence(t)
        s2 = s.variant(s1, t)
        pairs.append(ScoredPair(s1, s2, jaccard_gold(s1, s2)))

    topics = [i % spec.num_topics for i in range(spec.n_labeled)]
    pool = [LabeledText(s.sentence(t), f"topic{t}") for t in topics]
    order = s.rng.permutation(len(pool))
    pool = [pool[i] for i in order]
    n_train = int(round(spec.split[0] * len(pool)))
    n_val = int(round(spec.split[1] * len(pool)))
    labeled = DatasetSplit(
        tuple(pool[:n_train]), tuple(pool[n_train : n_train + n_val]), tuple(pool[n_train + n_val :])
    )
    return SynthData(s.topics, s.fillers, triplets, pairs, labeled, triplet_topics)

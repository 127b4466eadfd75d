"""Siamese sentence-embedding training and embedding benchmarks on a small numpy autodiff engine."""

from .datasets import LabeledText, ScoredPair, SynthSpec, TripletExample, synth_generate
from .encoder import EncoderConfig, EncoderModel, forward, init, load_checkpoint, save_checkpoint
from .evaluation import (
    EncoderEmbedder,
    EvalReport,
    KnnConfig,
    StaticEmbedder,
    classify_dataset,
    embedding_similarity_score,
    knn_predict,
    minkowski,
    pairwise_cosine_report,
    select_k,
    spearman,
)
from .losses import LossConfig, cosine, cosine_similarity_loss, mnrl_loss
from .pooling import PoolingStrategy, pool
from .tensor import Tape, Tensor, backward, finite_diff_check, no_grad
from .tokenizer import Vocabulary, build_vocab, encode_batch, tokenize
from .trainer import Setup, TrainConfig, train_nli, train_sts, train_two_step

__version__ = "0.1.0"

__all__ = [
    "backward",
    "build_vocab",
    "classify_dataset",
    "cosine",
    "cosine_similarity_loss",
    "embedding_similarity_score",
    "encode_batch",
    "EncoderConfig",
    "EncoderEmbedder",
    "EncoderModel",
    "EvalReport",
    "finite_diff_check",
    "forward",
    "init",
    "knn_predict",
    "KnnConfig",
    "LabeledText",
    "load_checkpoint",
    "LossConfig",
    "minkowski",
    "mnrl_loss",
    "no_grad",
    "pairwise_cosine_report",
    "pool",
    "PoolingStrategy",
    "save_checkpoint",
    "ScoredPair",
    "select_k",
    "Setup",
    "spearman",
    "StaticEmbedder",
    "synth_generate",
    "SynthSpec",
    "Tape",
    "Tensor",
    "tokenize",
    "train_nli",
    "train_sts",
    "train_two_step",
    "TrainConfig",
    "TripletExample",
    "Vocabulary",
]

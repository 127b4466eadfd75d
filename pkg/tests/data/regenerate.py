"""Rebuild the committed golden fixtures. Only run when a format change is intended."""

from pathlib import Path

import numpy as np

from sembed.encoder import EncoderConfig, init, save_checkpoint
from sembed.static_embed import WordVectorTable, save_vectors
from sembed.tokenizer import Vocabulary

HERE = Path(__file__).parent

GOLDEN_CONFIG = EncoderConfig(vocab_size=10, hidden_dim=4, num_layers=1, num_heads=2, ff_dim=8, max_len=5, seed=7)
GOLDEN_VOCAB = Vocabulary(("alpha", "beta", "gamma", "δέλτα", "मराठी", "zeta"))


def golden_checkpoint():
    model = init(GOLDEN_CONFIG, GOLDEN_VOCAB)
    save_checkpoint(model, GOLDEN_CONFIG, HERE / "golden_encoder.semb")


def word_vector_fixture():
    rng = np.random.default_rng(1000)
    words = [f"w{i:04d}" for i in range(1000)]
    vectors = {w: rng.normal(size=8) for w in words}
    save_vectors(WordVectorTable(8, vectors), HERE / "wordvecs_1000.txt")
    # norms computed with a plain loop so they do not share code with the loader
    with open(HERE / "wordvecs_1000.norms", "w", encoding="utf-8") as fh:
        for w in words:
            fh.write(f"{w} {sum(float(x) * float(x) for x in vectors[w]) ** 0.5!r}\n")


if __name__ == "__main__":
    golden_checkpoint()
    word_vector_fixture()

import pytest

from sembed import EncoderConfig, build_vocab, init

CORPUS = [
    "the cat sat on the mat",
    "a dog ran in the park",
    "cats and dogs are friends",
    "the park is green , the mat is red",
]


@pytest.fixture(scope="session")
def vocab():
    return build_vocab(CORPUS, 40)


@pytest.fixture
def tiny_model(vocab):
    cfg = EncoderConfig(vocab_size=40, hidden_dim=16, num_layers=2, num_heads=2, ff_dim=32, max_len=12, seed=11)
    return init(cfg, vocab)

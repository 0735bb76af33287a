import pytest

from ottopics import TrainConfig, generate_zipf_corpus, train

DATA_DIR = __file__.rsplit("/", 1)[0] + "/data"


@pytest.fixture(scope="session")
def tiny_corpus():
    """Small labeled synthetic corpus shared by training-level tests."""
    corpus, beta = generate_zipf_corpus(
        num_docs=60, vocab_size=40, num_topics=4, doc_len=30,
        zipf_exponent=1.1, seed=5)
    return corpus, beta


@pytest.fixture(scope="session")
def tiny_trained(tiny_corpus):
    """A quickly trained model on the tiny corpus (shared, read-only)."""
    corpus, _ = tiny_corpus
    cfg = TrainConfig(epochs=15, batch_size=30, learning_rate=2e-3, seed=3)
    model_cfg = dict(num_topics=4, embed_dim=8, hidden_size=32,
                     lambda_ecr=20.0)
    state, history = train(corpus, cfg, model_cfg)
    return corpus, state, history

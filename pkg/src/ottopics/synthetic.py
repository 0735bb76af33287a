"""Synthetic corpus generator with planted topics and Zipf-skewed words.

Each topic owns a disjoint block of the vocabulary; a small shared head
of words carries extra mass in every topic, mimicking the handful of
very frequent words that real corpora put in every document. Word
probabilities inside the head and inside each block decay as a Zipf law
``rank^(-exponent)``. Every document gets one dominant topic (its
label) and draws all tokens from that topic's distribution.

The shared head is what makes the generator useful as a collapse
testbed: a model that merely chases reconstruction keeps every topic
close to the head words, while the planted blocks stay recoverable.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .preprocessing import BowCorpus


def _zipf_weights(n: int, exponent: float) -> np.ndarray:
    ranks = np.arange(1, n + 1, dtype=np.float64)
    w = ranks ** (-exponent)
    return w / w.sum()


def generate_zipf_corpus(
    num_docs: int,
    vocab_size: int,
    num_topics: int,
    doc_len: int = 80,
    zipf_exponent: float = 1.1,
    seed: int = 0,
    head_fraction: float = 0.05,
    head_mass: float = 0.3,
) -> tuple[BowCorpus, np.ndarray]:
    """Generate a labeled corpus and its planted topic-word matrix.

    Returns the corpus and a (vocab_size, num_topics) matrix whose
    columns are the planted per-topic word distributions. Labels are a
    seeded shuffle of a balanced assignment, so all classes are
    nonempty whenever ``num_docs >= num_topics``. Fully deterministic
    for a fixed seed.
    """
    if num_topics < 2:
        raise ValidationError("num_topics must be >= 2")
    if vocab_size < 10 * num_topics:
        raise ValidationError(
            f"vocab_size must be >= 10 * num_topics ({10 * num_topics})")
    if num_docs < 1 or doc_len < 1:
        raise ValidationError("num_docs and doc_len must be positive")
    if zipf_exponent < 0:
        raise ValidationError("zipf_exponent must be nonnegative")
    if not 0 <= head_fraction < 0.5:
        raise ValidationError("head_fraction must lie in [0, 0.5)")
    if not 0 <= head_mass < 1:
        raise ValidationError("head_mass must lie in [0, 1)")

    rng = np.random.default_rng(seed)
    head_size = int(round(head_fraction * vocab_size))
    if head_size == 0:
        head_mass = 0.0

    # Split the non-head words into num_topics blocks of near-equal size.
    body = np.arange(head_size, vocab_size)
    blocks = np.array_split(body, num_topics)

    beta = np.zeros((vocab_size, num_topics))
    for k, block in enumerate(blocks):
        if head_size:
            beta[:head_size, k] = head_mass * _zipf_weights(head_size,
                                                            zipf_exponent)
        beta[block, k] = (1.0 - head_mass) * _zipf_weights(block.size,
                                                           zipf_exponent)

    labels = rng.permutation(np.arange(num_docs) % num_topics)
    rows = []
    for label in labels:
        counts = rng.multinomial(doc_len, beta[:, label])
        nonzero = np.nonzero(counts)[0]
        rows.append([(int(j), int(counts[j])) for j in nonzero])
    corpus = BowCorpus(rows=rows, vocab_size=vocab_size, labels=labels)
    return corpus, beta

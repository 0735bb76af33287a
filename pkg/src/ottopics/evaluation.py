"""Quality metrics: topic diversity, NPMI coherence, clustering scores,
and held-out perplexity.

Coherence is normalized pointwise mutual information over boolean
document co-occurrence in a reference corpus (by default the training
corpus itself). Clustering quality compares per-document argmax topic
assignments against gold labels via purity and NMI.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError
from .model import ModelState, compute_beta, encode, kl_term, recon_term
from .numerics import softmax
from .preprocessing import BowCorpus

logger = logging.getLogger(__name__)

_SMOOTH = 1e-12


@dataclass
class TopicSet:
    """K ordered lists of top word indices, n distinct entries each."""

    topics: list[list[int]]

    def __post_init__(self):
        if not self.topics:
            raise ValidationError("need at least one topic")
        n = len(self.topics[0])
        for words in self.topics:
            if len(words) != n:
                raise ShapeError("all topics must list the same number of words")
            if len(set(words)) != len(words):
                raise ValidationError("topic word lists must not repeat words")

    @property
    def top_n(self) -> int:
        return len(self.topics[0])


@dataclass
class ClusteringResult:
    """Predicted cluster per document next to its gold class."""

    assignments: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.assignments.size == 0:
            raise ValidationError("clustering result is empty")
        if self.assignments.shape != self.labels.shape:
            raise ShapeError("assignments and labels differ in length")


def topics_from_beta(beta: np.ndarray, n: int = 15) -> TopicSet:
    """Top-n words per topic column, ties broken by ascending word index."""
    beta = np.asarray(beta)
    v = beta.shape[0]
    if n > v:
        raise ValidationError(f"cannot take top {n} of {v} words")
    topics = []
    for k in range(beta.shape[1]):
        order = np.argsort(-beta[:, k], kind="stable")
        topics.append([int(j) for j in order[:n]])
    return TopicSet(topics)


def extract_topics(state: ModelState, n: int = 15) -> TopicSet:
    """Top-n words of each topic under the model's current embeddings."""
    return topics_from_beta(compute_beta(state.W, state.T, state.tau), n)


def topic_diversity(topics: TopicSet) -> float:
    """Fraction of unique words across all topic lists."""
    unique = set()
    for words in topics.topics:
        unique.update(words)
    return len(unique) / (len(topics.topics) * topics.top_n)


def _doc_occurrence(reference: BowCorpus) -> list[set[int]]:
    """Per-word sets of documents that contain the word at least once."""
    occ: list[set[int]] = [set() for _ in range(reference.vocab_size)]
    for i, row in enumerate(reference.rows):
        for j, _ in row:
            occ[j].add(i)
    return occ


def _pair_npmi(docs_i: set[int], docs_j: set[int], n_docs: int) -> float:
    co = len(docs_i & docs_j)
    if co == 0:
        return -1.0
    if co >= n_docs:
        # Both words in every document: zero information either way.
        return 0.0
    p_i = len(docs_i) / n_docs + _SMOOTH
    p_j = len(docs_j) / n_docs + _SMOOTH
    p_ij = co / n_docs + _SMOOTH
    return math.log(p_ij / (p_i * p_j)) / (-math.log(p_ij))


def npmi_coherence(topics: TopicSet, reference: BowCorpus) -> float:
    """Mean over topics of mean pairwise NPMI among the top words.

    Words never seen in the reference are scored with smoothed zero
    counts (their pairs never co-occur, scoring -1) and a warning.
    """
    if reference.num_docs == 0:
        raise ValidationError("reference corpus is empty")
    occurrence = _doc_occurrence(reference)
    n_docs = reference.num_docs
    warned: set[int] = set()

    def docs_of(word: int) -> set[int]:
        if word >= len(occurrence) or not occurrence[word]:
            if word not in warned:
                logger.warning("word index %d absent from reference corpus",
                               word)
                warned.add(word)
            return set()
        return occurrence[word]

    topic_scores = []
    for words in topics.topics:
        pair_scores = [
            _pair_npmi(docs_of(words[a]), docs_of(words[b]), n_docs)
            for a in range(len(words))
            for b in range(a + 1, len(words))
        ]
        topic_scores.append(float(np.mean(pair_scores)))
    return float(np.mean(topic_scores))


def purity(result: ClusteringResult) -> float:
    """Mean over clusters of the best single-class overlap."""
    total = 0
    for cluster in np.unique(result.assignments):
        members = result.labels[result.assignments == cluster]
        _, counts = np.unique(members, return_counts=True)
        total += int(counts.max())
    return total / result.assignments.size


def _entropy(counts: np.ndarray) -> float:
    p = counts / counts.sum()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def nmi(result: ClusteringResult) -> float:
    """Mutual information normalized by the mean of the two entropies.

    The degenerate single-cluster, single-class case is defined as 1.
    """
    assignments, labels = result.assignments, result.labels
    clusters, a_idx = np.unique(assignments, return_inverse=True)
    classes, l_idx = np.unique(labels, return_inverse=True)
    contingency = np.zeros((clusters.size, classes.size))
    np.add.at(contingency, (a_idx, l_idx), 1.0)

    n = contingency.sum()
    h_a = _entropy(contingency.sum(axis=1))
    h_l = _entropy(contingency.sum(axis=0))
    if h_a == 0.0 and h_l == 0.0:
        return 1.0

    p = contingency / n
    outer = np.outer(contingency.sum(axis=1), contingency.sum(axis=0)) / n**2
    mask = p > 0
    mi = float((p[mask] * np.log(p[mask] / outer[mask])).sum())
    return mi / ((h_a + h_l) / 2.0)


def doc_topic_distributions(corpus: BowCorpus, state: ModelState) -> np.ndarray:
    """Deterministic mean-encoding doc-topic distributions (N x K)."""
    mu, _ = encode(corpus.to_dense(), state.encoder)
    return softmax(mu)


def cluster_documents(corpus: BowCorpus, state: ModelState) -> np.ndarray:
    """Assign each document to its argmax topic."""
    return np.argmax(doc_topic_distributions(corpus, state), axis=1)


def perplexity(corpus: BowCorpus, state: ModelState,
               samples_per_doc: int = 1, seed: int = 0) -> float:
    """exp(total per-document loss / total token count); lower is better.

    With ``samples_per_doc`` of 1 the latent is the deterministic mean
    encoding (zero noise); larger values average the reconstruction term
    over seeded stochastic draws.
    """
    if samples_per_doc < 1:
        raise ValidationError("samples_per_doc must be >= 1")
    X = corpus.to_dense()
    beta = compute_beta(state.W, state.T, state.tau)
    mu, logvar = encode(X, state.encoder)
    kl = kl_term(mu, logvar, state.prior)

    if samples_per_doc == 1:
        theta = softmax(mu)
        recon = recon_term(X, beta, theta)
    else:
        rng = np.random.default_rng(seed)
        std = np.exp(0.5 * logvar)
        draws = np.zeros(X.shape[0])
        for _ in range(samples_per_doc):
            theta = softmax(mu + std * rng.standard_normal(mu.shape))
            draws += recon_term(X, beta, theta)
        recon = draws / samples_per_doc

    total_nats = float(np.sum(recon + kl))
    total_tokens = float(X.sum())
    if total_tokens == 0:
        raise ValidationError("corpus has no tokens")
    return math.exp(total_nats / total_tokens)


# ---------------------------------------------------------------------------
# JSON exports

def topics_to_json(topics: TopicSet, beta: np.ndarray,
                   vocab_words: list[str] | None = None) -> list[dict]:
    """One object per topic: id, word names, and their beta weights.

    Without a vocabulary, words get placeholder names ``w<index>``.
    """
    out = []
    for k, words in enumerate(topics.topics):
        names = [vocab_words[j] if vocab_words is not None else f"w{j}"
                 for j in words]
        out.append({
            "topic_id": k,
            "words": names,
            "weights": [float(beta[j, k]) for j in words],
        })
    return out


def write_topics_json(path, topics: TopicSet, beta: np.ndarray,
                      vocab_words: list[str] | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(topics_to_json(topics, beta, vocab_words), fh, indent=2)
        fh.write("\n")


def write_metrics_json(path, metrics: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")

"""scikit-learn estimator wrapping the topic model.

``ECRTM`` behaves like other sklearn topic models: ``fit`` on a
document-term count matrix, ``transform`` to document-topic
distributions, ``predict`` for hard cluster assignments. All
hyperparameters are constructor arguments so ``get_params``,
``set_params``, cloning, and grid search work as usual.
"""

from __future__ import annotations

import logging

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import ValidationError
from .evaluation import extract_topics
from .model import compute_beta, encode
from .numerics import softmax
from .preprocessing import BowCorpus
from .sinkhorn import SinkhornConfig
from .trainer import TrainConfig, train

logger = logging.getLogger(__name__)


def check_count_matrix(X, n_features: int | None = None) -> np.ndarray:
    """Validate a document-term matrix: 2-d, finite, nonnegative."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError(f"expected a 2-d count matrix, got shape {X.shape}")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise ValidationError("count matrix must be nonempty")
    if not np.all(np.isfinite(X)):
        raise ValidationError("count matrix contains non-finite values")
    if np.any(X < 0):
        raise ValidationError("counts must be nonnegative")
    if n_features is not None and X.shape[1] != n_features:
        raise ValidationError(
            f"matrix has {X.shape[1]} features, expected {n_features}")
    return X


class ECRTM(BaseEstimator, TransformerMixin):
    """Neural topic model regularized by embedding clustering transport.

    Parameters mirror the training pipeline; see the CLI for the same
    knobs on the command line. ``regularizer`` selects the embedding
    regularizer: "ecr" (transport plan), "dkm", "dkm-entropy", or
    "none".
    """

    def __init__(self, n_topics=10, embed_dim=16, hidden_size=200,
                 tau=1.0, lambda_ecr=100.0, regularizer="ecr",
                 entropy_weight=1.0, alpha=1.0, epsilon=0.05,
                 sinkhorn_max_iterations=1000, sinkhorn_stop_tolerance=0.005,
                 epochs=500, batch_size=200, learning_rate=2e-3, seed=0):
        self.n_topics = n_topics
        self.embed_dim = embed_dim
        self.hidden_size = hidden_size
        self.tau = tau
        self.lambda_ecr = lambda_ecr
        self.regularizer = regularizer
        self.entropy_weight = entropy_weight
        self.alpha = alpha
        self.epsilon = epsilon
        self.sinkhorn_max_iterations = sinkhorn_max_iterations
        self.sinkhorn_stop_tolerance = sinkhorn_stop_tolerance
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y=None):
        """Train on a (n_docs, n_words) count matrix.

        All-zero rows cannot be modeled and are dropped (with a warning)
        for training purposes only.
        """
        X = check_count_matrix(X)
        nonempty = X.sum(axis=1) > 0
        if not np.all(nonempty):
            logger.warning("dropping %d empty documents for training",
                           int((~nonempty).sum()))
            X = X[nonempty]
        if X.shape[0] == 0:
            raise ValidationError("no nonempty documents to train on")

        corpus = BowCorpus.from_dense(X)
        train_cfg = TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate, seed=self.seed)
        model_cfg = dict(
            num_topics=self.n_topics, embed_dim=self.embed_dim,
            hidden_size=self.hidden_size, tau=self.tau,
            lambda_ecr=self.lambda_ecr, alpha=self.alpha,
            regularizer=self.regularizer, entropy_weight=self.entropy_weight,
            sinkhorn_cfg=SinkhornConfig(
                max_iterations=self.sinkhorn_max_iterations,
                stop_tolerance=self.sinkhorn_stop_tolerance,
                epsilon=self.epsilon))
        self.state_, history = train(corpus, train_cfg, model_cfg)
        self.loss_history_ = [h.mean_loss for h in history]
        self.n_features_in_ = X.shape[1]
        self.beta_ = compute_beta(self.state_.W, self.state_.T, self.tau)
        self.components_ = self.beta_.T
        self.word_embeddings_ = self.state_.W
        self.topic_embeddings_ = self.state_.T
        return self

    def _check_fitted(self):
        if not hasattr(self, "state_"):
            raise NotFittedError(
                "This ECRTM instance is not fitted yet. Call fit first.")

    def transform(self, X):
        """Document-topic distributions from the mean encoding (n_docs, K)."""
        self._check_fitted()
        X = check_count_matrix(X, n_features=self.n_features_in_)
        mu, _ = encode(X, self.state_.encoder)
        return softmax(mu)

    def predict(self, X):
        """Hard topic assignment per document (argmax of transform)."""
        return np.argmax(self.transform(X), axis=1)

    def top_words(self, n: int = 15) -> list[list[int]]:
        """Indices of the n highest-weight words per topic."""
        self._check_fitted()
        return extract_topics(self.state_, n).topics

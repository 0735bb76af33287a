import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ottopics import ECRTM, ValidationError, generate_zipf_corpus
from ottopics.estimator import check_count_matrix


@pytest.fixture(scope="module")
def fitted():
    corpus, _ = generate_zipf_corpus(60, 40, 4, doc_len=30, seed=5)
    X = corpus.to_dense()
    model = ECRTM(n_topics=4, embed_dim=8, hidden_size=32, lambda_ecr=20.0,
                  epochs=15, batch_size=30, seed=3)
    return model.fit(X), X, corpus.labels


class TestCheckCountMatrix:
    def test_accepts_counts(self):
        X = check_count_matrix([[1, 0], [2, 3]])
        assert X.dtype == np.float64

    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            check_count_matrix([[1, -1]])

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            check_count_matrix([[1.0, np.nan]])

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValidationError):
            check_count_matrix([1, 2, 3])

    def test_feature_count_enforced(self):
        with pytest.raises(ValidationError):
            check_count_matrix([[1, 2]], n_features=3)


class TestSklearnProtocol:
    def test_get_set_params_roundtrip(self):
        model = ECRTM(n_topics=7, tau=0.5)
        params = model.get_params()
        assert params["n_topics"] == 7 and params["tau"] == 0.5
        model.set_params(lambda_ecr=3.0)
        assert model.lambda_ecr == 3.0

    def test_clone_preserves_params(self):
        model = ECRTM(n_topics=5, epsilon=0.01, seed=42)
        copy = clone(model)
        assert copy.get_params() == model.get_params()

    def test_not_fitted_errors(self):
        model = ECRTM()
        with pytest.raises(NotFittedError):
            model.transform(np.ones((2, 3)))
        with pytest.raises(NotFittedError):
            model.top_words()


class TestFitTransform:
    def test_fitted_attributes(self, fitted):
        model, X, _ = fitted
        v, k = X.shape[1], 4
        assert model.beta_.shape == (v, k)
        assert model.components_.shape == (k, v)
        assert model.word_embeddings_.shape == (8, v)
        assert model.topic_embeddings_.shape == (8, k)
        assert len(model.loss_history_) == 15
        assert model.n_features_in_ == v

    def test_transform_rows_on_simplex(self, fitted):
        model, X, _ = fitted
        theta = model.transform(X)
        assert theta.shape == (X.shape[0], 4)
        np.testing.assert_allclose(theta.sum(axis=1), np.ones(X.shape[0]),
                                   atol=1e-12)

    def test_predict_range(self, fitted):
        model, X, _ = fitted
        labels = model.predict(X)
        assert labels.shape == (X.shape[0],)
        assert labels.min() >= 0 and labels.max() < 4

    def test_transform_rejects_wrong_width(self, fitted):
        model, X, _ = fitted
        with pytest.raises(ValidationError):
            model.transform(X[:, :-1])

    def test_beta_rows_on_simplex(self, fitted):
        model, _, _ = fitted
        np.testing.assert_allclose(model.beta_.sum(axis=1),
                                   np.ones(model.beta_.shape[0]), atol=1e-12)

    def test_top_words_shape(self, fitted):
        model, _, _ = fitted
        words = model.top_words(n=5)
        assert len(words) == 4 and all(len(w) == 5 for w in words)

    def test_empty_rows_dropped_for_training_only(self):
        corpus, _ = generate_zipf_corpus(30, 40, 3, doc_len=20, seed=6)
        X = corpus.to_dense()
        X_with_empty = np.vstack([X, np.zeros((2, X.shape[1]))])
        model = ECRTM(n_topics=3, embed_dim=8, hidden_size=16, epochs=3,
                      batch_size=16, seed=1)
        model.fit(X_with_empty)
        theta = model.transform(X_with_empty)
        assert theta.shape[0] == X_with_empty.shape[0]

    def test_same_seed_reproducible(self):
        corpus, _ = generate_zipf_corpus(30, 40, 3, doc_len=20, seed=6)
        X = corpus.to_dense()
        kwargs = dict(n_topics=3, embed_dim=8, hidden_size=16, epochs=3,
                      batch_size=16, seed=9)
        a = ECRTM(**kwargs).fit(X)
        b = ECRTM(**kwargs).fit(X)
        np.testing.assert_array_equal(a.beta_, b.beta_)
        assert a.loss_history_ == b.loss_history_

    def test_fit_transform_equals_fit_then_transform(self):
        corpus, _ = generate_zipf_corpus(30, 40, 3, doc_len=20, seed=6)
        X = corpus.to_dense()
        kwargs = dict(n_topics=3, embed_dim=8, hidden_size=16, epochs=3,
                      batch_size=16, seed=9)
        via_fit_transform = ECRTM(**kwargs).fit_transform(X)
        via_two_steps = ECRTM(**kwargs).fit(X).transform(X)
        np.testing.assert_allclose(via_fit_transform, via_two_steps,
                                   atol=1e-12)

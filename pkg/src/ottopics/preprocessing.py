"""Text ingestion: tokenization, vocabulary building, bag-of-words.

The token filter applies five rules in order: lowercase, strip
punctuation, drop tokens containing digits, drop tokens shorter than the
minimum length, drop stopwords. Documents left empty by the filter are
dropped (and logged); labels are filtered in lockstep so alignment is
never lost.

``CorpusVectorizer`` wraps the same machinery in a scikit-learn
transformer. Unlike the pipeline functions it keeps one output row per
input document (possibly all-zero), as transformers must.
"""

from __future__ import annotations

import logging
import string
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._stopwords import ENGLISH_STOPWORDS
from .errors import EmptyCorpusError, ParseError, ShapeError, ValidationError

logger = logging.getLogger(__name__)

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})
_DIGITS = set(string.digits)


@dataclass
class PreprocessConfig:
    vocab_size: int = 5000
    max_df: float = 1.0
    min_token_len: int = 3
    stopword_list: frozenset[str] = ENGLISH_STOPWORDS
    lowercase: bool = True
    min_df: float | None = None  # optional floor, off by default

    def __post_init__(self):
        if not 0 < self.max_df <= 1:
            raise ValidationError("max_df must lie in (0, 1]")
        if self.min_token_len < 1:
            raise ValidationError("min_token_len must be >= 1")
        if self.vocab_size < 2:
            raise ValidationError("vocab_size must be >= 2")
        if self.min_df is not None and not 0 <= self.min_df <= 1:
            raise ValidationError("min_df must lie in [0, 1]")


@dataclass
class Vocabulary:
    """Bidirectional word/index map with per-word document frequencies."""

    words: list[str]
    index: dict[str, int]
    doc_freq: np.ndarray

    def __post_init__(self):
        if len(self.words) == 0:
            raise EmptyCorpusError("empty vocabulary")
        if len(set(self.words)) != len(self.words):
            raise ValidationError("vocabulary contains duplicate words")
        self.doc_freq = np.asarray(self.doc_freq, dtype=np.float64)
        if self.doc_freq.shape != (len(self.words),):
            raise ShapeError("doc_freq must align with the word list")
        if np.any(self.doc_freq <= 0) or np.any(self.doc_freq > 1):
            raise ValidationError("document frequencies must lie in (0, 1]")

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def from_words(cls, words: list[str],
                   doc_freq=None) -> "Vocabulary":
        if doc_freq is None:
            doc_freq = np.ones(len(words))
        return cls(words=list(words),
                   index={w: i for i, w in enumerate(words)},
                   doc_freq=np.asarray(doc_freq, dtype=np.float64))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for word in self.words:
                fh.write(word + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        """Read one word per line. Document frequencies are not part of
        the file format and come back as 1.0 placeholders."""
        with open(path, "r", encoding="utf-8") as fh:
            words = [line.rstrip("\n") for line in fh]
        words = [w for w in words if w]
        if not words:
            raise EmptyCorpusError(f"vocabulary file {path} is empty")
        return cls.from_words(words)


@dataclass
class BowCorpus:
    """Sparse document-term counts with optional integer labels.

    Every document carries at least one token; indices stay below the
    vocabulary size and counts are positive.
    """

    rows: list[list[tuple[int, int]]]
    vocab_size: int
    labels: np.ndarray | None = None

    def __post_init__(self):
        for i, row in enumerate(self.rows):
            if not row:
                raise ValidationError(f"document {i} has no tokens")
            for j, c in row:
                if not 0 <= j < self.vocab_size:
                    raise ValidationError(
                        f"document {i}: word index {j} outside "
                        f"[0, {self.vocab_size})")
                if c < 1:
                    raise ValidationError(
                        f"document {i}: count {c} for word {j} must be >= 1")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != len(self.rows):
                raise ShapeError(
                    f"{len(self.labels)} labels for {len(self.rows)} documents")

    @property
    def num_docs(self) -> int:
        return len(self.rows)

    def total_tokens(self) -> int:
        return sum(c for row in self.rows for _, c in row)

    def to_dense(self) -> np.ndarray:
        X = np.zeros((len(self.rows), self.vocab_size))
        for i, row in enumerate(self.rows):
            for j, c in row:
                X[i, j] = c
        return X

    @classmethod
    def from_dense(cls, X: np.ndarray, labels=None) -> "BowCorpus":
        X = np.asarray(X)
        rows = [[(int(j), int(X[i, j])) for j in np.nonzero(X[i])[0]]
                for i in range(X.shape[0])]
        return cls(rows=rows, vocab_size=X.shape[1], labels=labels)


def _filter_tokens(text: str, cfg: PreprocessConfig) -> list[str]:
    if cfg.lowercase:
        text = text.lower()
    tokens = text.translate(_PUNCT_TABLE).split()
    return [
        t for t in tokens
        if not (set(t) & _DIGITS)
        and len(t) >= cfg.min_token_len
        and t not in cfg.stopword_list
    ]


def preprocess(raw_docs: list[str],
               cfg: PreprocessConfig | None = None) -> list[list[str]]:
    """Tokenize and filter; documents that come out empty are dropped."""
    if not raw_docs:
        raise ValidationError("no documents given")
    if cfg is None:
        cfg = PreprocessConfig()
    docs = []
    dropped = 0
    for i, text in enumerate(raw_docs):
        tokens = _filter_tokens(text, cfg)
        if tokens:
            docs.append(tokens)
        else:
            dropped += 1
            logger.info("dropping document %d: no tokens survive filtering", i)
    if dropped:
        logger.warning("preprocessing dropped %d of %d documents",
                       dropped, len(raw_docs))
    if not docs:
        raise EmptyCorpusError("empty corpus: no document survived filtering")
    return docs


def build_vocab(docs: list[list[str]],
                cfg: PreprocessConfig | None = None) -> Vocabulary:
    """Frequency-ranked vocabulary with document-frequency filtering.

    Words whose document frequency exceeds ``max_df`` (or undershoots the
    optional ``min_df``) are excluded; survivors are ranked by total
    corpus frequency, ties broken lexicographically, and truncated to
    ``vocab_size``.
    """
    if not docs:
        raise ValidationError("no documents given")
    if cfg is None:
        cfg = PreprocessConfig()
    n_docs = len(docs)
    freq: dict[str, int] = {}
    df_count: dict[str, int] = {}
    for tokens in docs:
        for t in tokens:
            freq[t] = freq.get(t, 0) + 1
        for t in set(tokens):
            df_count[t] = df_count.get(t, 0) + 1

    kept = [w for w in freq if df_count[w] / n_docs <= cfg.max_df]
    if cfg.min_df is not None:
        kept = [w for w in kept if df_count[w] / n_docs >= cfg.min_df]
    if not kept:
        raise EmptyCorpusError(
            "empty vocabulary: every word fell outside the document "
            "frequency bounds")
    kept.sort(key=lambda w: (-freq[w], w))
    kept = kept[:cfg.vocab_size]
    doc_freq = np.array([df_count[w] / n_docs for w in kept])
    return Vocabulary.from_words(kept, doc_freq)


def vectorize(docs: list[list[str]], vocab: Vocabulary,
              labels=None) -> BowCorpus:
    """Count in-vocabulary tokens per document.

    Out-of-vocabulary tokens are ignored; documents with no in-vocab
    token are dropped with a warning, filtering ``labels`` in lockstep.
    """
    if len(vocab) == 0:
        raise EmptyCorpusError("empty vocabulary")
    if labels is not None and len(labels) != len(docs):
        raise ShapeError(f"{len(labels)} labels for {len(docs)} documents")
    rows = []
    kept_labels = []
    for i, tokens in enumerate(docs):
        counts: dict[int, int] = {}
        for t in tokens:
            j = vocab.index.get(t)
            if j is not None:
                counts[j] = counts.get(j, 0) + 1
        if not counts:
            logger.warning("dropping document %d: no in-vocabulary tokens", i)
            continue
        rows.append(sorted(counts.items()))
        if labels is not None:
            kept_labels.append(labels[i])
    if not rows:
        raise EmptyCorpusError("empty corpus: no document had in-vocabulary tokens")
    return BowCorpus(
        rows=rows, vocab_size=len(vocab),
        labels=np.asarray(kept_labels, dtype=np.int64) if labels is not None
        else None)


def build_corpus(raw_docs: list[str], cfg: PreprocessConfig | None = None,
                 labels=None) -> tuple[BowCorpus, Vocabulary]:
    """Full pipeline: filter, build the vocabulary, vectorize.

    Label alignment survives both drop points (empty after filtering,
    empty after vocabulary lookup).
    """
    if cfg is None:
        cfg = PreprocessConfig()
    if labels is not None and len(labels) != len(raw_docs):
        raise ShapeError(f"{len(labels)} labels for {len(raw_docs)} documents")
    docs, kept_labels = [], []
    for i, text in enumerate(raw_docs):
        tokens = _filter_tokens(text, cfg)
        if tokens:
            docs.append(tokens)
            if labels is not None:
                kept_labels.append(labels[i])
        else:
            logger.info("dropping document %d: no tokens survive filtering", i)
    if not docs:
        raise EmptyCorpusError("empty corpus: no document survived filtering")
    vocab = build_vocab(docs, cfg)
    corpus = vectorize(docs, vocab,
                       labels=kept_labels if labels is not None else None)
    return corpus, vocab


# ---------------------------------------------------------------------------
# File formats

def read_corpus_file(path) -> list[str]:
    """UTF-8 text, one document per line."""
    with open(path, "r", encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def read_labels_file(path) -> np.ndarray:
    """One integer label per line, aligned with the corpus file."""
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError as exc:
                raise ParseError(f"bad label {line!r}",
                                 path=path, line=lineno) from exc
    return np.asarray(labels, dtype=np.int64)


def write_labels_file(path, labels) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label in labels:
            fh.write(f"{int(label)}\n")


def write_bow_file(path, corpus: BowCorpus) -> None:
    """Bit-exact sparse format: `V <int> D <int>` header, then one line
    per document `label<TAB>idx:count ...` with ascending indices and
    label -1 when absent."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"V {corpus.vocab_size} D {corpus.num_docs}\n")
        for i, row in enumerate(corpus.rows):
            label = int(corpus.labels[i]) if corpus.labels is not None else -1
            cells = " ".join(f"{j}:{c}" for j, c in row)
            fh.write(f"{label}\t{cells}\n")


def read_bow_file(path) -> BowCorpus:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "V" or header[2] != "D":
            raise ParseError("expected header `V <int> D <int>`",
                             path=path, line=1)
        try:
            vocab_size, num_docs = int(header[1]), int(header[3])
        except ValueError as exc:
            raise ParseError(str(exc), path=path, line=1) from exc

        rows, labels = [], []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            head, _, rest = line.rstrip("\n").partition("\t")
            try:
                labels.append(int(head))
            except ValueError as exc:
                raise ParseError(f"bad label {head!r}",
                                 path=path, line=lineno) from exc
            row = []
            prev = -1
            for cell in rest.split():
                idx_s, _, cnt_s = cell.partition(":")
                try:
                    idx, cnt = int(idx_s), int(cnt_s)
                except ValueError as exc:
                    raise ParseError(f"bad cell {cell!r}",
                                     path=path, line=lineno) from exc
                if not 0 <= idx < vocab_size:
                    raise ParseError(f"index {idx} out of range [0, {vocab_size})",
                                     path=path, line=lineno)
                if idx <= prev:
                    raise ParseError("indices must be strictly increasing",
                                     path=path, line=lineno)
                if cnt < 1:
                    raise ParseError(f"count must be >= 1, got {cnt}",
                                     path=path, line=lineno)
                row.append((idx, cnt))
                prev = idx
            if not row:
                raise ParseError("document has no entries",
                                 path=path, line=lineno)
            rows.append(row)

    if len(rows) != num_docs:
        raise ParseError(f"header promised {num_docs} documents, found {len(rows)}",
                         path=path)
    label_arr = np.asarray(labels, dtype=np.int64)
    return BowCorpus(rows=rows, vocab_size=vocab_size,
                     labels=None if np.all(label_arr == -1) else label_arr)


# ---------------------------------------------------------------------------
# scikit-learn surface

class CorpusVectorizer(BaseEstimator, TransformerMixin):
    """Raw documents to count matrix, learning the vocabulary on fit.

    Keeps one row per input document (all-zero rows allowed) so it can
    sit in a sklearn pipeline; use :func:`build_corpus` when dropped
    documents and label alignment matter.
    """

    def __init__(self, vocab_size=5000, max_df=1.0, min_df=None,
                 min_token_len=3, lowercase=True, stopwords=None):
        self.vocab_size = vocab_size
        self.max_df = max_df
        self.min_df = min_df
        self.min_token_len = min_token_len
        self.lowercase = lowercase
        self.stopwords = stopwords

    def _config(self) -> PreprocessConfig:
        return PreprocessConfig(
            vocab_size=self.vocab_size, max_df=self.max_df,
            min_df=self.min_df, min_token_len=self.min_token_len,
            lowercase=self.lowercase,
            stopword_list=(frozenset(self.stopwords)
                           if self.stopwords is not None
                           else ENGLISH_STOPWORDS))

    def fit(self, X, y=None):
        cfg = self._config()
        docs = preprocess(list(X), cfg)
        self.vocabulary_ = build_vocab(docs, cfg)
        return self

    def transform(self, X):
        if not hasattr(self, "vocabulary_"):
            raise NotFittedError("CorpusVectorizer is not fitted yet")
        cfg = self._config()
        vocab = self.vocabulary_
        out = np.zeros((len(X), len(vocab)))
        for i, text in enumerate(X):
            for t in _filter_tokens(text, cfg):
                j = vocab.index.get(t)
                if j is not None:
                    out[i, j] += 1
        return out

    def get_feature_names_out(self, input_features=None):
        if not hasattr(self, "vocabulary_"):
            raise NotFittedError("CorpusVectorizer is not fitted yet")
        return np.asarray(self.vocabulary_.words, dtype=object)

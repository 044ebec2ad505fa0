"""Per-entry topic messages and the cached accumulators behind them.

Each nonzero corpus entry (word w, doc d, count x) carries a normalized
K-vector message: the current belief over topics for that cell's tokens.
Three accumulators cache the count-weighted message sums so that a single
entry's neighborhood can be read in O(K) instead of O(corpus):

    doc_topic[d, k]  = sum over words  of x * message[k]   (per document)
    word_topic[w, k] = sum over docs   of x * message[k]   (per word)
    topic_total[k]   = sum over all entries of x * message[k]

Excluding an entry from its own neighborhood is then a subtraction of
x * message, which is also how messages are swapped in incrementally.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus

# Exclusion sums are mathematically nonnegative; incremental float updates can
# push them marginally below zero. Anything worse than this is a real bug.
CLAMP_TOLERANCE = 1e-9


class InternalConsistencyError(RuntimeError):
    """Cached accumulators (or sampler counts) diverged from their definition."""


@dataclass(frozen=True)
class Hyperparams:
    """Topic count and symmetric Dirichlet smoothing for theta (alpha) and phi (beta)."""

    num_topics: int
    alpha: float = 0.01
    beta: float = 0.01

    def __post_init__(self):
        if self.num_topics < 1:
            raise ValueError(f"num_topics must be >= 1, got {self.num_topics}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")


@dataclass
class TopicModel:
    """Estimated multinomials: theta rows sum to 1, phi columns sum to 1."""

    theta: np.ndarray  # (num_docs, K) document-topic proportions
    phi: np.ndarray    # (vocab_size, K) word probabilities per topic


def model_from_accumulators(doc_topic, word_topic, hyper: Hyperparams) -> TopicModel:
    """Smoothed normalization shared by message states and Gibbs counts.

    theta[d, k] = (doc_topic[d, k] + alpha) / sum_k (doc_topic[d, k] + alpha)
    phi[w, k]   = (word_topic[w, k] + beta) / sum_w (word_topic[w, k] + beta)
    """
    theta = doc_topic + hyper.alpha
    theta /= theta.sum(axis=1, keepdims=True)
    phi = word_topic + hyper.beta
    phi /= phi.sum(axis=0, keepdims=True)
    return TopicModel(theta=theta, phi=phi)


def _check_clamp(values: np.ndarray) -> np.ndarray:
    low = values.min() if values.size else 0.0
    if low < -CLAMP_TOLERANCE:
        raise InternalConsistencyError(
            f"exclusion sum fell to {low}; accumulators have drifted")
    return np.maximum(values, 0.0, out=values)


class MessageState:
    """Messages plus accumulators for one training run; single-owner, mutable."""

    def __init__(self, corpus: Corpus, hyper: Hyperparams, messages: np.ndarray):
        self.corpus = corpus
        self.hyper = hyper
        self.messages = messages
        self.iteration = 0
        # Entry counts as a float column, reused by every vectorized sweep.
        self.count_col = corpus.entry_count.astype(np.float64)[:, None]
        self.doc_topic = np.zeros((corpus.num_docs, hyper.num_topics))
        self.word_topic = np.zeros((corpus.vocab_size, hyper.num_topics))
        self.topic_total = np.zeros(hyper.num_topics)
        self.rebuild_accumulators()

    @classmethod
    def init_random(cls, corpus: Corpus, hyper: Hyperparams, seed: int) -> "MessageState":
        """Messages drawn iid uniform(0,1) then normalized per entry."""
        rng = np.random.default_rng(seed)
        messages = rng.random((corpus.num_entries, hyper.num_topics))
        messages /= messages.sum(axis=1, keepdims=True)
        return cls(corpus, hyper, messages)

    def rebuild_accumulators(self) -> None:
        """Recompute all three accumulators from the messages."""
        self.doc_topic[:] = self._dense_doc_topic()
        self.word_topic[:] = self._dense_word_topic()
        self.topic_total[:] = self.word_topic.sum(axis=0)

    def _dense_doc_topic(self) -> np.ndarray:
        weighted = self.count_col * self.messages
        out = np.zeros_like(self.doc_topic)
        order = self.corpus.doc_major_order()
        boundaries = self.corpus.doc_ptr[:-1]
        nonempty = self.corpus.doc_ptr[:-1] < self.corpus.doc_ptr[1:]
        if order.size:
            sums = np.add.reduceat(weighted[order], boundaries[nonempty], axis=0)
            out[nonempty] = sums
        return out

    def _dense_word_topic(self) -> np.ndarray:
        weighted = self.count_col * self.messages
        out = np.zeros_like(self.word_topic)
        boundaries = self.corpus.word_ptr[:-1]
        nonempty = self.corpus.word_ptr[:-1] < self.corpus.word_ptr[1:]
        if weighted.size:
            sums = np.add.reduceat(weighted, boundaries[nonempty], axis=0)
            out[nonempty] = sums
        return out

    def accumulator_error(self) -> float:
        """Largest absolute cell deviation from a from-scratch rebuild."""
        err = 0.0
        err = max(err, float(np.abs(self.doc_topic - self._dense_doc_topic()).max(initial=0.0)))
        dense_word = self._dense_word_topic()
        err = max(err, float(np.abs(self.word_topic - dense_word).max(initial=0.0)))
        err = max(err, float(np.abs(self.topic_total - dense_word.sum(axis=0)).max(initial=0.0)))
        return err

    def neighborhood(self, entry: int):
        """Exclusion sums for one entry: (doc_excl, word_excl, total_excl).

        Each is the corresponding accumulator minus this entry's own
        count-weighted message, clamped at zero against rounding drift.
        """
        d = self.corpus.entry_doc[entry]
        w = self.corpus.entry_word[entry]
        own = self.count_col[entry] * self.messages[entry]
        doc_excl = _check_clamp(self.doc_topic[d] - own)
        word_excl = _check_clamp(self.word_topic[w] - own)
        total_excl = _check_clamp(self.topic_total - own)
        return doc_excl, word_excl, total_excl

    def apply_message(self, entry: int, new_message: np.ndarray) -> np.ndarray:
        """Swap in a message, adjust accumulators by the delta, return the old one."""
        if abs(float(new_message.sum()) - 1.0) > 1e-10:
            raise ValueError("message must be normalized to sum 1")
        old = self.messages[entry].copy()
        delta = self.count_col[entry] * (new_message - old)
        self.doc_topic[self.corpus.entry_doc[entry]] += delta
        self.word_topic[self.corpus.entry_word[entry]] += delta
        self.topic_total += delta
        self.messages[entry] = new_message
        return old

    def estimate_theta(self) -> np.ndarray:
        theta = self.doc_topic + self.hyper.alpha
        theta /= theta.sum(axis=1, keepdims=True)
        return theta

    def estimate_phi(self) -> np.ndarray:
        phi = self.word_topic + self.hyper.beta
        phi /= phi.sum(axis=0, keepdims=True)
        return phi

    def estimate_model(self) -> TopicModel:
        return model_from_accumulators(self.doc_topic, self.word_topic, self.hyper)


def write_matrix_csv(matrix: np.ndarray, stream) -> None:
    """Dense matrix as CSV: header "id,k1..kK", ids 1-based, full precision."""
    k = matrix.shape[1]
    stream.write("id," + ",".join(f"k{j + 1}" for j in range(k)) + "\n")
    for i, row in enumerate(matrix, start=1):
        stream.write(f"{i}," + ",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(stream) -> np.ndarray:
    """Inverse of write_matrix_csv; validates the header and id column."""
    reader = csv.reader(stream)
    header = next(reader)
    if not header or header[0] != "id" or any(
            h != f"k{j + 1}" for j, h in enumerate(header[1:])):
        raise ValueError(f"unexpected matrix CSV header: {header!r}")
    rows = []
    for i, row in enumerate(reader, start=1):
        if int(row[0]) != i:
            raise ValueError(f"matrix CSV row {i} has id {row[0]}")
        rows.append([float(v) for v in row[1:]])
    return np.array(rows)

"""Perplexity metrics, held-out prediction, CV orchestration, topic tables.

Training perplexity is the exponentiated negative mean per-token log
likelihood under the current (theta, phi):

    exp( - sum_{w,d} x_{w,d} ln( sum_k theta[d,k] phi[w,k] ) / total_tokens )

Held-out documents are scored by fold-in: each test document's tokens are
split 80/20 by a seeded draw, theta is inferred on the 80% with phi frozen,
and perplexity is reported on the remaining 20%.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, split_folds
from .engines import TrainConfig, train
from .message_state import TopicModel, _check_clamp

# Sub-seed derivation for cross-validation; all randomness flows from one seed.
_FOLD_SEED_STRIDE = 1000
_HOLDOUT_SEED_OFFSET = 17


def perplexity(model: TopicModel, corpus: Corpus) -> float:
    """Corpus perplexity under a topic model; equals vocab_size for a uniform model."""
    if corpus.total_tokens == 0:
        raise ValueError("perplexity is undefined for a corpus with no tokens")
    if model.theta.shape[0] != corpus.num_docs or model.phi.shape[0] != corpus.vocab_size:
        raise ValueError("model dimensions do not match the corpus")
    token_prob = np.einsum("ik,ik->i", model.theta[corpus.entry_doc],
                           model.phi[corpus.entry_word])
    if token_prob.size and token_prob.min() <= 0.0:
        raise ValueError("non-positive token probability; model is not smoothed")
    log_likelihood = float(corpus.entry_count @ np.log(token_prob))
    return float(np.exp(-log_likelihood / corpus.total_tokens))


def infer_doc_topics(phi: np.ndarray, corpus: Corpus, hyper,
                     entry_counts: np.ndarray | None = None,
                     max_sweeps: int = 100, tol: float = 1e-4) -> np.ndarray:
    """Fold-in: document-topic proportions with the word-topic side frozen.

    Runs synchronous belief updates in which only the document factor moves,
    until the largest theta change drops below tol or the sweep cap is hit.
    entry_counts overrides the corpus counts (used for partial-token splits);
    entries with zero count are ignored. Returns theta for every document;
    documents without observed tokens get the pure-smoothing (uniform) row.
    """
    num_topics = phi.shape[1]
    counts = corpus.entry_count if entry_counts is None else entry_counts
    active = counts > 0
    docs = corpus.entry_doc[active]
    words = corpus.entry_word[active]
    x = counts[active].astype(np.float64)[:, None]

    doc_topic = np.zeros((corpus.num_docs, num_topics))
    theta = np.full((corpus.num_docs, num_topics), 1.0 / num_topics)
    if docs.size == 0:
        return theta
    messages = np.full((docs.size, num_topics), 1.0 / num_topics)
    np.add.at(doc_topic, docs, x * messages)

    for _ in range(max_sweeps):
        doc_excl = _check_clamp(doc_topic[docs] - x * messages)
        value = (doc_excl + hyper.alpha) * phi[words]
        messages = value / value.sum(axis=1, keepdims=True)
        doc_topic[:] = 0.0
        np.add.at(doc_topic, docs, x * messages)
        new_theta = doc_topic + hyper.alpha
        new_theta /= new_theta.sum(axis=1, keepdims=True)
        change = float(np.abs(new_theta - theta).max())
        theta = new_theta
        if change < tol:
            break
    return theta


def holdout_split(corpus: Corpus, seed: int,
                  observed_fraction: float = 0.8) -> tuple[np.ndarray, np.ndarray]:
    """Partition each entry's count into (observed, held) by a seeded draw."""
    rng = np.random.default_rng(seed)
    observed = rng.binomial(corpus.entry_count, observed_fraction)
    return observed, corpus.entry_count - observed


@dataclass(frozen=True)
class HoldoutReport:
    perplexity: float
    evaluated_docs: int
    skipped_docs: int  # documents with tokens but an empty held-out portion
    held_tokens: int


def predictive_perplexity_report(phi: np.ndarray, test_docs: Corpus, hyper,
                                 seed: int) -> HoldoutReport:
    """Fold-in evaluation of held-out documents against a fixed phi."""
    observed, held = holdout_split(test_docs, seed)
    theta = infer_doc_topics(phi, test_docs, hyper, entry_counts=observed)

    held_mask = held > 0
    held_tokens = int(held.sum())
    if held_tokens == 0:
        raise ValueError("no held-out tokens; test documents are too small")
    docs = test_docs.entry_doc[held_mask]
    words = test_docs.entry_word[held_mask]
    token_prob = np.einsum("ik,ik->i", theta[docs], phi[words])
    log_likelihood = float(held[held_mask] @ np.log(token_prob))

    doc_tokens = np.bincount(test_docs.entry_doc, weights=test_docs.entry_count,
                             minlength=test_docs.num_docs)
    doc_held = np.bincount(test_docs.entry_doc, weights=held,
                           minlength=test_docs.num_docs)
    skipped = int(((doc_tokens > 0) & (doc_held == 0)).sum())
    return HoldoutReport(perplexity=float(np.exp(-log_likelihood / held_tokens)),
                         evaluated_docs=int((doc_held > 0).sum()),
                         skipped_docs=skipped, held_tokens=held_tokens)


def predictive_perplexity(phi: np.ndarray, test_docs: Corpus, hyper, seed: int) -> float:
    return predictive_perplexity_report(phi, test_docs, hyper, seed).perplexity


def synthesize_corpus(num_docs: int, vocab_size: int, num_topics: int,
                      tokens_per_doc: int, seed: int) -> Corpus:
    """Generative LDA sampler: a desk-scale stand-in for real datasets.

    Document mixtures are symmetric Dirichlet(0.1) rows, topic-word
    distributions symmetric Dirichlet(0.05) columns; every document carries
    exactly tokens_per_doc tokens.
    """
    for name, value in (("num_docs", num_docs), ("vocab_size", vocab_size),
                        ("num_topics", num_topics), ("tokens_per_doc", tokens_per_doc)):
        if value < 1:
            raise ValueError(f"{name} must be >= 1, got {value}")
    rng = np.random.default_rng(seed)
    theta = rng.dirichlet(np.full(num_topics, 0.1), size=num_docs)
    topic_word = rng.dirichlet(np.full(vocab_size, 0.05), size=num_topics)
    docs, words, counts = [], [], []
    for d in range(num_docs):
        word_prob = theta[d] @ topic_word
        word_prob /= word_prob.sum()
        drawn = rng.multinomial(tokens_per_doc, word_prob)
        present = np.flatnonzero(drawn)
        docs.append(np.full(present.size, d, dtype=np.int64))
        words.append(present.astype(np.int64))
        counts.append(drawn[present].astype(np.int64))
    vocabulary = [f"w{i + 1:05d}" for i in range(vocab_size)]
    return Corpus(num_docs, vocab_size,
                  np.concatenate(docs), np.concatenate(words),
                  np.concatenate(counts), vocabulary)


@dataclass
class TopicTable:
    """Per topic, the strongest words with their probabilities, descending."""

    topics: list[list[tuple[str, float]]]

    def to_text(self) -> str:
        blocks = []
        for k, rows in enumerate(self.topics, start=1):
            lines = [f"topic {k}"]
            lines += [f"  {word}\t{prob:.6f}" for word, prob in rows]
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + "\n"


def top_words(phi: np.ndarray, vocab: list[str], n: int) -> TopicTable:
    """The n highest-probability words per topic; ties break by word id."""
    vocab_size, num_topics = phi.shape
    if len(vocab) != vocab_size:
        raise ValueError(f"vocab has {len(vocab)} words, phi has {vocab_size} rows")
    if n > vocab_size:
        warnings.warn(f"requested {n} words per topic, vocabulary has {vocab_size}",
                      stacklevel=2)
        n = vocab_size
    topics = []
    for k in range(num_topics):
        order = np.argsort(-phi[:, k], kind="stable")[:n]
        topics.append([(vocab[w], float(phi[w, k])) for w in order])
    return TopicTable(topics)


@dataclass
class CvFoldResult:
    fold_id: int
    pred_perplexity: float  # nan when the fold failed
    converged_at: int | None
    train_seconds: float
    skipped_docs: int = 0
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class CvReport:
    engine: str
    rows: list[CvFoldResult]

    def successful(self) -> list[CvFoldResult]:
        return [r for r in self.rows if not r.failed]

    def aggregates(self) -> dict[str, tuple[float, float]]:
        """(mean, population std) per column over successful folds."""
        out = {}
        rows = self.successful()
        for column, values in (
                ("pred_perplexity", [r.pred_perplexity for r in rows]),
                ("converged_at", [r.converged_at for r in rows
                                  if r.converged_at is not None]),
                ("train_seconds", [r.train_seconds for r in rows])):
            if values:
                arr = np.asarray(values, dtype=np.float64)
                out[column] = (float(arr.mean()), float(arr.std()))
            else:
                out[column] = (float("nan"), float("nan"))
        return out

    def mean_pred_perplexity(self) -> float:
        return self.aggregates()["pred_perplexity"][0]


def cross_validate(corpus: Corpus, engine: str, config: TrainConfig,
                   n_folds: int) -> CvReport:
    """Train/evaluate once per fold; folds are independent and order-free.

    Each fold trains on the other folds' documents (same matrix dimensions,
    test documents emptied) and scores its own documents by fold-in
    prediction. A failed fold is recorded and left out of the aggregates.
    """
    folds = split_folds(corpus, n_folds, seed=config.seed)
    rows = []
    for fold in folds:
        fold_seed = config.seed + _FOLD_SEED_STRIDE * fold.fold_id
        try:
            result = train(engine, corpus.restrict_to_docs(fold.train_doc_ids),
                           config.with_seed(fold_seed))
            report = predictive_perplexity_report(
                result.final_model.phi, corpus.restrict_to_docs(fold.test_doc_ids),
                config.hyper, seed=fold_seed + _HOLDOUT_SEED_OFFSET)
        except (ValueError, RuntimeError) as exc:
            rows.append(CvFoldResult(fold.fold_id, float("nan"), None, 0.0,
                                     error=str(exc)))
            continue
        rows.append(CvFoldResult(fold.fold_id, report.perplexity,
                                 result.converged_at, result.train_seconds,
                                 skipped_docs=report.skipped_docs))
    return CvReport(engine=engine, rows=rows)


def write_cv_csv(report: CvReport, stream) -> None:
    """Fold rows plus mean/std summary rows."""
    stream.write("fold,pred_perplexity,converged_at,train_seconds\n")
    for row in report.rows:
        pred = "" if row.failed else repr(row.pred_perplexity)
        conv = "" if row.converged_at is None else str(row.converged_at)
        stream.write(f"{row.fold_id},{pred},{conv},{row.train_seconds:.6f}\n")
    agg = report.aggregates()
    for stat, index in (("mean", 0), ("std", 1)):
        stream.write(f"{stat},{agg['pred_perplexity'][index]!r},"
                     f"{agg['converged_at'][index]!r},"
                     f"{agg['train_seconds'][index]!r}\n")


def read_cv_csv(stream) -> tuple[list[CvFoldResult], dict[str, dict[str, float]]]:
    header = next(iter(stream)).strip()
    if header != "fold,pred_perplexity,converged_at,train_seconds":
        raise ValueError(f"unexpected CV header: {header!r}")
    rows, summary = [], {}
    for line in stream:
        if not line.strip():
            continue
        fold, pred, conv, secs = line.strip().split(",")
        if fold in ("mean", "std"):
            summary[fold] = {"pred_perplexity": float(pred),
                             "converged_at": float(conv),
                             "train_seconds": float(secs)}
            continue
        rows.append(CvFoldResult(int(fold),
                                 float(pred) if pred else float("nan"),
                                 int(conv) if conv else None,
                                 float(secs),
                                 error=None if pred else "failed"))
    return rows, summary

"""The four training backends behind one loop: sbp, rbp, gs, and vb.

All four are message-passing updates on the same sparse matrix. The belief
update for one entry multiplies its document-side and word-side neighborhood
factors,

    new(k) ~ (doc_excl(k) + alpha) / sum_k (doc_excl(k) + alpha)
             * (word_excl(k) + beta) / (total_excl(k) + W * beta)

normalized over topics. The engines differ only in how they traverse and
commit updates:

  sbp  synchronous: every message recomputed from the previous iteration's
       frozen state, swapped in at once.
  rbp  asynchronous: entries updated in place in descending-residual unit
       order; fast-moving messages propagate within the same sweep.
  gs   stochastic: each token's topic is resampled from the same conditional
       with hard counts instead of soft messages.
  vb   synchronous with each factor passed through exp(digamma), the
       variational expectation of a log-Dirichlet.

Training stops once consecutive evaluated training perplexities differ by
less than the configured threshold.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _loops
from ._loops import gs_sweep, rbp_sweep
from .corpus import Corpus
from .message_state import (Hyperparams, InternalConsistencyError, MessageState,
                            TopicModel, _check_clamp, model_from_accumulators)
from .scheduler import ResidualTable, ScheduleMode
from .special import digamma

ENGINES = ("sbp", "rbp", "gs", "vb")

# Every run's randomness derives from one base seed with fixed offsets.
_SCHEDULE_SEED_OFFSET = 1


class NumericalFailureError(RuntimeError):
    """Training perplexity became non-finite at some iteration."""

    def __init__(self, iteration: int, value: float):
        super().__init__(f"perplexity became {value} at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class TrainConfig:
    hyper: Hyperparams
    max_iters: int = 1000
    convergence_threshold: float = 1.0
    seed: int = 0
    schedule_mode: ScheduleMode = ScheduleMode.WORD
    eval_every: int = 1

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.convergence_threshold > 0:
            raise ValueError("convergence_threshold must be > 0")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    elapsed_seconds: float  # cumulative training time, evaluation excluded
    perplexity: float


@dataclass
class TrainResult:
    engine: str
    trace: list[TracePoint]
    converged_at: int | None
    final_state: object  # MessageState, or GsAssignments for gs
    final_model: TopicModel
    train_seconds: float
    eval_seconds: float
    schedule_seconds: float = 0.0
    # rbp only: per-iteration (sum, max, argmax unit) of accumulated residuals
    residual_trace: list[tuple[float, float, int]] = field(default_factory=list)

    @property
    def final_perplexity(self) -> float:
        return self.trace[-1].perplexity


def has_converged(previous: float, current: float, threshold: float) -> bool:
    """Consecutive-evaluation stopping rule on training perplexity."""
    return abs(current - previous) < threshold


def bp_update_entry(state: MessageState, entry: int) -> np.ndarray:
    """The normalized belief update for a single entry."""
    hyper = state.hyper
    doc_excl, word_excl, total_excl = state.neighborhood(entry)
    doc_factor = doc_excl + hyper.alpha
    doc_factor = doc_factor / doc_factor.sum()
    w_beta = state.corpus.vocab_size * hyper.beta
    value = doc_factor * (word_excl + hyper.beta) / (total_excl + w_beta)
    total = value.sum()
    assert total > 0.0, "smoothed factors cannot all vanish"
    return value / total


def _synchronous_messages(state: MessageState, variational: bool) -> np.ndarray:
    """All entries' updates from the frozen current state, as one matrix."""
    corpus = state.corpus
    hyper = state.hyper
    own = state.count_col * state.messages
    doc_excl = _check_clamp(state.doc_topic[corpus.entry_doc] - own)
    word_excl = _check_clamp(state.word_topic[corpus.entry_word] - own)
    total_excl = _check_clamp(state.topic_total[None, :] - own)
    w_beta = corpus.vocab_size * hyper.beta
    if variational:
        log_value = (digamma(doc_excl + hyper.alpha)
                     + digamma(word_excl + hyper.beta)
                     - digamma(total_excl + w_beta))
        log_value -= log_value.max(axis=1, keepdims=True)
        value = np.exp(log_value)
    else:
        doc_factor = doc_excl + hyper.alpha
        doc_factor /= doc_factor.sum(axis=1, keepdims=True)
        value = doc_factor * (word_excl + hyper.beta) / (total_excl + w_beta)
    value /= value.sum(axis=1, keepdims=True)
    return value


def sbp_iteration(state: MessageState) -> None:
    """Synchronous BP: double-buffered update of every message at once."""
    state.messages = _synchronous_messages(state, variational=False)
    state.rebuild_accumulators()
    state.iteration += 1


def vb_iteration(state: MessageState) -> None:
    """Synchronous variational update; factors pass through exp(digamma)."""
    state.messages = _synchronous_messages(state, variational=True)
    state.rebuild_accumulators()
    state.iteration += 1


def rbp_iteration(state: MessageState, table: ResidualTable) -> tuple[float, float]:
    """One residual-scheduled asynchronous sweep.

    Visits units in the table's current order, applying every update
    immediately, then re-sorts the schedule by the residuals just
    accumulated. Returns (update_seconds, schedule_seconds); only residual
    bucketing and the sort count as scheduling overhead.
    """
    corpus = state.corpus
    hyper = state.hyper
    start = time.perf_counter()
    table.reset()
    visit = table.visit_order(corpus)
    residuals = np.empty(corpus.num_entries)
    try:
        rbp_sweep(visit, corpus.entry_doc, corpus.entry_word, corpus.entry_count,
                  state.messages, state.doc_topic, state.word_topic,
                  state.topic_total, hyper.alpha, hyper.beta,
                  corpus.vocab_size * hyper.beta, residuals)
    except RuntimeError as exc:
        raise InternalConsistencyError(str(exc)) from None
    state.iteration += 1
    mid = time.perf_counter()
    table.accumulate_entries(corpus, residuals)
    table.build_schedule()
    return mid - start, time.perf_counter() - mid


class GsAssignments:
    """Token-level topic labels and their count matrices for collapsed Gibbs."""

    def __init__(self, corpus: Corpus, hyper: Hyperparams, labels: np.ndarray):
        self.corpus = corpus
        self.hyper = hyper
        self.token_doc = np.repeat(corpus.entry_doc, corpus.entry_count)
        self.token_word = np.repeat(corpus.entry_word, corpus.entry_count)
        self.labels = labels
        self.iteration = 0
        self.n_dk = np.zeros((corpus.num_docs, hyper.num_topics), dtype=np.int64)
        self.n_wk = np.zeros((corpus.vocab_size, hyper.num_topics), dtype=np.int64)
        self.n_k = np.zeros(hyper.num_topics, dtype=np.int64)
        self.rebuild_counts()

    @classmethod
    def init_uniform(cls, corpus: Corpus, hyper: Hyperparams, seed: int) -> "GsAssignments":
        """Each token's label drawn uniformly from the topics."""
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, hyper.num_topics, size=corpus.total_tokens,
                              dtype=np.int64)
        return cls(corpus, hyper, labels)

    @property
    def num_tokens(self) -> int:
        return self.labels.shape[0]

    def _tally(self, ids: np.ndarray, size: int) -> np.ndarray:
        k = self.hyper.num_topics
        flat = np.bincount(ids * k + self.labels, minlength=size * k)
        return flat.reshape(size, k).astype(np.int64)

    def rebuild_counts(self) -> None:
        self.n_dk = self._tally(self.token_doc, self.corpus.num_docs)
        self.n_wk = self._tally(self.token_word, self.corpus.vocab_size)
        self.n_k = self.n_wk.sum(axis=0)

    def count_error(self) -> int:
        """Largest absolute count deviation from a from-scratch tally."""
        err = int(np.abs(self.n_dk - self._tally(self.token_doc, self.corpus.num_docs)).max(initial=0))
        rebuilt_wk = self._tally(self.token_word, self.corpus.vocab_size)
        err = max(err, int(np.abs(self.n_wk - rebuilt_wk).max(initial=0)))
        err = max(err, int(np.abs(self.n_k - rebuilt_wk.sum(axis=0)).max(initial=0)))
        return err

    def estimate_model(self) -> TopicModel:
        return model_from_accumulators(self.n_dk.astype(np.float64),
                                       self.n_wk.astype(np.float64), self.hyper)


def gs_iteration(assignments: GsAssignments, sweep_seed: int) -> None:
    """One seeded collapsed Gibbs sweep over every token."""
    hyper = assignments.hyper
    try:
        gs_sweep(assignments.token_doc, assignments.token_word, assignments.labels,
                 assignments.n_dk, assignments.n_wk, assignments.n_k,
                 hyper.alpha, hyper.beta,
                 assignments.corpus.vocab_size * hyper.beta, sweep_seed)
    except RuntimeError as exc:
        raise InternalConsistencyError(str(exc)) from None
    assignments.iteration += 1


def _gs_sweep_seed(base_seed: int, iteration: int) -> int:
    return (base_seed * 1_000_003 + iteration) & 0x7FFFFFFF


def train(engine: str, corpus: Corpus, config: TrainConfig) -> TrainResult:
    """Run one engine to convergence or the iteration cap.

    Convergence is declared at the first evaluation whose perplexity is
    within the threshold of the previous evaluation. Wall-clock in the trace
    covers training only; evaluation time is returned separately.
    """
    from .evaluation import perplexity  # local import: evaluation orchestrates engines

    engine = engine.lower()
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    if corpus.total_tokens == 0:
        raise ValueError("cannot train on a corpus with no tokens")

    table = None
    if engine in ("rbp", "gs"):
        _loops.warm_up()
    if engine == "gs":
        state: MessageState | GsAssignments = GsAssignments.init_uniform(
            corpus, config.hyper, config.seed)
    else:
        state = MessageState.init_random(corpus, config.hyper, config.seed)
        if engine == "rbp":
            table = ResidualTable(config.schedule_mode, corpus,
                                  config.seed + _SCHEDULE_SEED_OFFSET)

    trace: list[TracePoint] = []
    residual_trace: list[tuple[float, float, int]] = []
    converged_at = None
    train_seconds = eval_seconds = schedule_seconds = 0.0
    previous = None

    for t in range(1, config.max_iters + 1):
        start = time.perf_counter()
        if engine == "sbp":
            sbp_iteration(state)
        elif engine == "vb":
            vb_iteration(state)
        elif engine == "rbp":
            _, sched = rbp_iteration(state, table)
            schedule_seconds += sched
            if state.iteration % 100 == 0:  # bound incremental-update drift
                state.rebuild_accumulators()
        else:
            gs_iteration(state, _gs_sweep_seed(config.seed, t))
        train_seconds += time.perf_counter() - start
        if table is not None:
            residual_trace.append(table.summary())

        if t % config.eval_every == 0:
            eval_start = time.perf_counter()
            current = perplexity(state.estimate_model(), corpus)
            eval_seconds += time.perf_counter() - eval_start
            if not math.isfinite(current):
                raise NumericalFailureError(t, current)
            trace.append(TracePoint(t, train_seconds, current))
            if previous is not None and has_converged(
                    previous, current, config.convergence_threshold):
                converged_at = t
                break
            previous = current

    return TrainResult(engine=engine, trace=trace, converged_at=converged_at,
                       final_state=state, final_model=state.estimate_model(),
                       train_seconds=train_seconds, eval_seconds=eval_seconds,
                       schedule_seconds=schedule_seconds,
                       residual_trace=residual_trace)


def write_trace_csv(trace: list[TracePoint], stream) -> None:
    stream.write("iter,elapsed_s,perplexity\n")
    for point in trace:
        stream.write(f"{point.iteration},{point.elapsed_seconds:.6f},"
                     f"{point.perplexity!r}\n")


def read_trace_csv(stream) -> list[TracePoint]:
    header = next(iter(stream)).strip()
    if header != "iter,elapsed_s,perplexity":
        raise ValueError(f"unexpected trace header: {header!r}")
    points = []
    for line in stream:
        if not line.strip():
            continue
        it, elapsed, perp = line.strip().split(",")
        points.append(TracePoint(int(it), float(elapsed), float(perp)))
    return points

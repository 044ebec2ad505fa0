"""Residual bookkeeping and the dynamic update order for residual BP.

A residual is the count-weighted L1 distance between an entry's message at
successive iterations. Residuals are accumulated per scheduling unit (word,
document, or individual entry) over one sweep, and the next sweep visits
units in descending accumulated residual, so fast-moving parts of the
matrix propagate first.
"""

from __future__ import annotations

import enum

import numpy as np

from .corpus import Corpus


class ScheduleMode(enum.Enum):
    """Granularity of residual accumulation and of the update order."""

    WORD = "word"    # one bucket per vocabulary word (default; fixed-size schedule)
    DOC = "doc"      # one bucket per document (useful when docs < words)
    ENTRY = "entry"  # one bucket per nonzero entry (finest, costliest sort)

    @classmethod
    def parse(cls, name: str) -> "ScheduleMode":
        try:
            return cls(name.lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown schedule mode {name!r}; expected one of {valid}") from None


def entry_residual(old_message: np.ndarray, new_message: np.ndarray, count: int) -> float:
    """count * L1 distance between two normalized messages of equal length."""
    if old_message.shape != new_message.shape:
        raise ValueError("messages must have the same length")
    for msg in (old_message, new_message):
        if abs(float(msg.sum()) - 1.0) > 1e-10:
            raise ValueError("messages must be normalized to sum 1")
    return float(count) * float(np.abs(new_message - old_message).sum())


def _concat_ranges(starts: np.ndarray, stops: np.ndarray) -> np.ndarray:
    """Concatenate arange(starts[i], stops[i]) for all i, preserving order."""
    lengths = stops - starts
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.repeat(np.cumsum(lengths) - lengths, lengths)
    return np.repeat(starts, lengths) + (np.arange(total, dtype=np.int64) - offsets)


class ResidualTable:
    """Per-unit residuals plus the unit permutation they induce.

    The first order is a seeded random permutation; after each sweep
    build_schedule() re-sorts units by descending residual with ties broken
    by ascending unit id, so the order is a deterministic function of the
    residual values alone.
    """

    def __init__(self, mode: ScheduleMode, corpus: Corpus, seed: int):
        self.mode = mode
        if mode is ScheduleMode.WORD:
            n_units = corpus.vocab_size
        elif mode is ScheduleMode.DOC:
            n_units = corpus.num_docs
        else:
            n_units = corpus.num_entries
        self.values = np.zeros(n_units)
        self.order = np.random.default_rng(seed).permutation(n_units).astype(np.int64)

    @property
    def num_units(self) -> int:
        return self.values.shape[0]

    def reset(self) -> None:
        """Zero all buckets; call at the start of every sweep."""
        self.values[:] = 0.0

    def accumulate(self, word: int, doc: int, entry: int, residual: float) -> None:
        """Add one entry's residual into the bucket its unit owns."""
        if residual < 0:
            raise ValueError("residuals are nonnegative")
        if self.mode is ScheduleMode.WORD:
            self.values[word] += residual
        elif self.mode is ScheduleMode.DOC:
            self.values[doc] += residual
        else:
            self.values[entry] += residual

    def accumulate_entries(self, corpus: Corpus, entry_residuals: np.ndarray) -> None:
        """Bucket a full sweep's per-entry residuals in one pass."""
        if self.mode is ScheduleMode.WORD:
            self.values += np.bincount(corpus.entry_word, weights=entry_residuals,
                                       minlength=self.num_units)
        elif self.mode is ScheduleMode.DOC:
            self.values += np.bincount(corpus.entry_doc, weights=entry_residuals,
                                       minlength=self.num_units)
        else:
            self.values += entry_residuals

    def build_schedule(self) -> np.ndarray:
        """Re-sort units: descending residual, ties by ascending unit id."""
        self.order = np.argsort(-self.values, kind="stable").astype(np.int64)
        return self.order

    def visit_order(self, corpus: Corpus) -> np.ndarray:
        """Entry indices in sweep order for the current unit schedule.

        Within a word, entries run over documents ascending; within a
        document, over words ascending.
        """
        if self.mode is ScheduleMode.WORD:
            return _concat_ranges(corpus.word_ptr[self.order],
                                  corpus.word_ptr[self.order + 1])
        if self.mode is ScheduleMode.DOC:
            positions = _concat_ranges(corpus.doc_ptr[self.order],
                                       corpus.doc_ptr[self.order + 1])
            return corpus.doc_major_order()[positions]
        return self.order

    def summary(self) -> tuple[float, float, int]:
        """(sum, max, argmax unit id) of the current residuals."""
        if self.num_units == 0:
            return 0.0, 0.0, 0
        return float(self.values.sum()), float(self.values.max()), int(self.values.argmax())

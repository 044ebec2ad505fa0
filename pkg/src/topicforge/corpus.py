"""Sparse bag-of-words corpora with dual (by-document / by-word) traversal.

A corpus is the set of nonzero cells of a document-word count matrix. Entries
are stored word-major (sorted by word id, then document id) because the
residual-scheduled trainer sweeps the matrix by vocabulary word; a second
permutation index provides document-major traversal for everything else.

File I/O follows the UCI bag-of-words layout: a docword file with three
integer header lines (num docs, vocab size, num nonzeros) followed by one
"doc word count" triple per line, all ids 1-based, plus an optional vocab
file with one word per line. Internally everything is 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np


class DocwordFormatError(ValueError):
    """Raised for malformed, out-of-range, duplicate, or non-positive input."""


@dataclass(frozen=True)
class CorpusStats:
    """Size summary: mean tokens and mean distinct words per document."""

    num_docs: int
    vocab_size: int
    mean_tokens_per_doc: float
    mean_distinct_words_per_doc: float


@dataclass(frozen=True)
class FoldSplit:
    """One cross-validation fold; doc ids are internal (0-based)."""

    fold_id: int
    train_doc_ids: frozenset[int]
    test_doc_ids: frozenset[int]


class Corpus:
    """Immutable sparse document-word count matrix.

    Construction validates bounds, positivity, and uniqueness of the
    (word, doc) cells, then canonicalizes entry storage to word-major
    order, so two corpora built from the same cell set are identical
    regardless of input order.
    """

    def __init__(self, num_docs, vocab_size, doc_ids, word_ids, counts,
                 vocabulary: Sequence[str] = ()):
        if num_docs < 0 or vocab_size < 0:
            raise DocwordFormatError("num_docs and vocab_size must be nonnegative")
        doc_ids = np.asarray(doc_ids, dtype=np.int64)
        word_ids = np.asarray(word_ids, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if not (doc_ids.shape == word_ids.shape == counts.shape) or doc_ids.ndim != 1:
            raise DocwordFormatError("entry arrays must be 1-d and equally sized")
        if doc_ids.size:
            if doc_ids.min() < 0 or doc_ids.max() >= num_docs:
                raise DocwordFormatError("document id out of range")
            if word_ids.min() < 0 or word_ids.max() >= vocab_size:
                raise DocwordFormatError("word id out of range")
            if counts.min() < 1:
                raise DocwordFormatError("entry counts must be >= 1")
        if vocabulary and len(vocabulary) != vocab_size:
            raise DocwordFormatError(
                f"vocabulary has {len(vocabulary)} entries, expected {vocab_size}")

        order = np.lexsort((doc_ids, word_ids))
        self.num_docs = int(num_docs)
        self.vocab_size = int(vocab_size)
        self.entry_doc = np.ascontiguousarray(doc_ids[order])
        self.entry_word = np.ascontiguousarray(word_ids[order])
        self.entry_count = np.ascontiguousarray(counts[order])
        self.vocabulary = list(vocabulary)

        if self.num_entries > 1:
            same = (np.diff(self.entry_word) == 0) & (np.diff(self.entry_doc) == 0)
            if same.any():
                i = int(np.flatnonzero(same)[0])
                raise DocwordFormatError(
                    f"duplicate entry for word {self.entry_word[i] + 1}, "
                    f"doc {self.entry_doc[i] + 1}")

        # CSR-style pointers for by-word slices; permutation for by-doc order.
        self.word_ptr = np.searchsorted(self.entry_word, np.arange(vocab_size + 1))
        self._doc_order = np.lexsort((self.entry_word, self.entry_doc))
        self.doc_ptr = np.searchsorted(
            self.entry_doc[self._doc_order], np.arange(num_docs + 1))
        self.total_tokens = int(self.entry_count.sum())

    @property
    def num_entries(self) -> int:
        return self.entry_doc.shape[0]

    def by_word(self, word: int) -> np.ndarray:
        """Entry indices of one word, documents ascending."""
        return np.arange(self.word_ptr[word], self.word_ptr[word + 1])

    def by_doc(self, doc: int) -> np.ndarray:
        """Entry indices of one document, words ascending."""
        return self._doc_order[self.doc_ptr[doc]:self.doc_ptr[doc + 1]]

    def doc_major_order(self) -> np.ndarray:
        """Permutation of entry indices sorted by (doc, word)."""
        return self._doc_order

    def entry_index(self, word: int, doc: int) -> int:
        """Locate the entry for cell (word, doc); KeyError if absent."""
        lo, hi = self.word_ptr[word], self.word_ptr[word + 1]
        pos = lo + np.searchsorted(self.entry_doc[lo:hi], doc)
        if pos == hi or self.entry_doc[pos] != doc:
            raise KeyError(f"no entry for word {word}, doc {doc}")
        return int(pos)

    def restrict_to_docs(self, doc_ids: Iterable[int]) -> "Corpus":
        """Corpus with only the given documents' entries.

        Dimensions and ids are preserved; excluded documents become empty,
        so models trained on the restriction stay index-compatible.
        """
        keep = np.zeros(self.num_docs, dtype=bool)
        keep[np.fromiter(doc_ids, dtype=np.int64)] = True
        mask = keep[self.entry_doc]
        return Corpus(self.num_docs, self.vocab_size,
                      self.entry_doc[mask], self.entry_word[mask],
                      self.entry_count[mask], self.vocabulary)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return (self.num_docs == other.num_docs
                and self.vocab_size == other.vocab_size
                and np.array_equal(self.entry_doc, other.entry_doc)
                and np.array_equal(self.entry_word, other.entry_word)
                and np.array_equal(self.entry_count, other.entry_count))

    def __repr__(self) -> str:
        return (f"Corpus(docs={self.num_docs}, vocab={self.vocab_size}, "
                f"entries={self.num_entries}, tokens={self.total_tokens})")


def _header_int(lines, what: str) -> int:
    for lineno, raw in lines:
        text = raw.strip()
        if not text:
            continue
        try:
            value = int(text)
        except ValueError:
            raise DocwordFormatError(
                f"line {lineno}: expected integer {what}, got {text!r}") from None
        if value < 0:
            raise DocwordFormatError(f"line {lineno}: {what} must be nonnegative")
        return value
    raise DocwordFormatError(f"unexpected end of input while reading {what}")


def parse_docword(stream: IO[str] | Iterable[str],
                  vocab_stream: IO[str] | Iterable[str] | None = None) -> Corpus:
    """Parse a UCI docword stream (and optional vocab stream) into a Corpus.

    Blank lines are ignored. Malformed lines, ids outside the declared
    ranges, duplicate cells, and counts below 1 raise DocwordFormatError
    with a 1-based line number.
    """
    lines = enumerate(stream, start=1)
    num_docs = _header_int(lines, "document count")
    vocab_size = _header_int(lines, "vocabulary size")
    num_entries = _header_int(lines, "nonzero count")

    docs = np.empty(num_entries, dtype=np.int64)
    words = np.empty(num_entries, dtype=np.int64)
    counts = np.empty(num_entries, dtype=np.int64)
    seen: set[tuple[int, int]] = set()
    filled = 0
    for lineno, raw in lines:
        text = raw.strip()
        if not text:
            continue
        if filled == num_entries:
            raise DocwordFormatError(
                f"line {lineno}: more than the declared {num_entries} entries")
        fields = text.split()
        if len(fields) != 3:
            raise DocwordFormatError(
                f"line {lineno}: expected 'doc word count', got {text!r}")
        try:
            d, w, x = int(fields[0]), int(fields[1]), int(fields[2])
        except ValueError:
            raise DocwordFormatError(
                f"line {lineno}: non-integer field in {text!r}") from None
        if not 1 <= d <= num_docs:
            raise DocwordFormatError(
                f"line {lineno}: doc id {d} outside 1..{num_docs}")
        if not 1 <= w <= vocab_size:
            raise DocwordFormatError(
                f"line {lineno}: word id {w} outside 1..{vocab_size}")
        if x < 1:
            raise DocwordFormatError(f"line {lineno}: count {x} must be >= 1")
        if (w, d) in seen:
            raise DocwordFormatError(
                f"line {lineno}: duplicate entry for word {w}, doc {d}")
        seen.add((w, d))
        docs[filled] = d - 1
        words[filled] = w - 1
        counts[filled] = x
        filled += 1
    if filled != num_entries:
        raise DocwordFormatError(
            f"unexpected end of input: read {filled} of {num_entries} entries")

    vocabulary: list[str] = []
    if vocab_stream is not None:
        vocabulary = [line.rstrip("\n") for line in vocab_stream]
        while vocabulary and vocabulary[-1] == "":
            vocabulary.pop()
        if len(vocabulary) != vocab_size:
            raise DocwordFormatError(
                f"vocab stream has {len(vocabulary)} words, expected {vocab_size}")
    return Corpus(num_docs, vocab_size, docs, words, counts, vocabulary)


def load_docword(docword_path, vocab_path=None) -> Corpus:
    """parse_docword over files on disk."""
    vocab = None
    with open(docword_path, encoding="utf-8") as stream:
        if vocab_path is not None:
            with open(vocab_path, encoding="utf-8") as vocab:
                return parse_docword(stream, vocab)
        return parse_docword(stream)


def write_docword(corpus: Corpus, stream: IO[str]) -> None:
    """Serialize back to the docword triple format (doc-major, 1-based)."""
    stream.write(f"{corpus.num_docs}\n{corpus.vocab_size}\n{corpus.num_entries}\n")
    for i in corpus.doc_major_order():
        stream.write(f"{corpus.entry_doc[i] + 1} {corpus.entry_word[i] + 1} "
                     f"{corpus.entry_count[i]}\n")


def write_vocab(corpus: Corpus, stream: IO[str]) -> None:
    for word in corpus.vocabulary:
        stream.write(word + "\n")


def stats(corpus: Corpus) -> CorpusStats:
    """Mean tokens per doc and mean distinct words per doc."""
    if corpus.num_docs == 0:
        raise ValueError("cannot compute stats of a corpus with no documents")
    return CorpusStats(
        num_docs=corpus.num_docs,
        vocab_size=corpus.vocab_size,
        mean_tokens_per_doc=corpus.total_tokens / corpus.num_docs,
        mean_distinct_words_per_doc=corpus.num_entries / corpus.num_docs,
    )


def split_folds(corpus: Corpus, n_folds: int, seed: int) -> list[FoldSplit]:
    """Deal documents round-robin into n_folds disjoint test sets.

    The document order is a seeded uniform shuffle, so the split is
    deterministic given the seed and every document lands in exactly one
    test set.
    """
    if n_folds < 2:
        raise ValueError(f"need at least 2 folds, got {n_folds}")
    if n_folds > corpus.num_docs:
        raise ValueError(
            f"cannot split {corpus.num_docs} documents into {n_folds} folds")
    perm = np.random.default_rng(seed).permutation(corpus.num_docs)
    all_docs = frozenset(range(corpus.num_docs))
    folds = []
    for f in range(n_folds):
        test = frozenset(int(d) for d in perm[f::n_folds])
        folds.append(FoldSplit(fold_id=f + 1,
                               train_doc_ids=all_docs - test,
                               test_doc_ids=test))
    return folds

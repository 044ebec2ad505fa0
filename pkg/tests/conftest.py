import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from topicforge import Corpus, Hyperparams, MessageState, synthesize_corpus


def random_corpus(num_docs, vocab_size, seed, density=0.6, max_count=4):
    """Small dense-ish corpus with randomized counts; at least one entry per doc."""
    rng = np.random.default_rng(seed)
    docs, words, counts = [], [], []
    for d in range(num_docs):
        present = rng.random(vocab_size) < density
        if not present.any():
            present[rng.integers(vocab_size)] = True
        for w in np.flatnonzero(present):
            docs.append(d)
            words.append(int(w))
            counts.append(int(rng.integers(1, max_count + 1)))
    return Corpus(num_docs, vocab_size, docs, words, counts)


def random_state(corpus, num_topics, seed, alpha=0.01, beta=0.01):
    return MessageState.init_random(corpus, Hyperparams(num_topics, alpha, beta), seed)


@pytest.fixture(scope="session")
def bundled_corpus():
    """The synthetic benchmark corpus used by the acceptance experiments."""
    return synthesize_corpus(200, 500, 10, 100, seed=144)

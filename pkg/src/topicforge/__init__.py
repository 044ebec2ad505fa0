"""LDA training as unified message passing, with a convergence benchmark harness."""

from .corpus import (Corpus, CorpusStats, DocwordFormatError, FoldSplit,
                     load_docword, parse_docword, split_folds, stats,
                     write_docword, write_vocab)
from .engines import (ENGINES, GsAssignments, NumericalFailureError, TracePoint,
                      TrainConfig, TrainResult, bp_update_entry, gs_iteration,
                      rbp_iteration, sbp_iteration, train, vb_iteration)
from .evaluation import (CvFoldResult, CvReport, TopicTable, cross_validate,
                         perplexity, predictive_perplexity, synthesize_corpus,
                         top_words)
from .message_state import (Hyperparams, InternalConsistencyError, MessageState,
                            TopicModel)
from .scheduler import ResidualTable, ScheduleMode, entry_residual
from .special import digamma

__version__ = "0.1.0"

__all__ = [
    "Corpus", "CorpusStats", "DocwordFormatError", "FoldSplit",
    "load_docword", "parse_docword", "split_folds", "stats",
    "write_docword", "write_vocab",
    "ENGINES", "GsAssignments", "NumericalFailureError", "TracePoint",
    "TrainConfig", "TrainResult", "bp_update_entry", "gs_iteration",
    "rbp_iteration", "sbp_iteration", "train", "vb_iteration",
    "CvFoldResult", "CvReport", "TopicTable", "cross_validate",
    "perplexity", "predictive_perplexity", "synthesize_corpus", "top_words",
    "Hyperparams", "InternalConsistencyError", "MessageState", "TopicModel",
    "ResidualTable", "ScheduleMode", "entry_residual",
    "digamma",
    "__version__",
]

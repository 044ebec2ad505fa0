"""Command-line orchestrator.

Commands:
  train     one engine on one corpus -> trace.csv + theta.csv/phi.csv
  cv        k-fold cross-validation -> cv_report.csv
  bench     engine x topic-count grid -> per-run traces + summary.csv
  synth     generate a synthetic corpus -> docword.txt + vocab.txt
  topwords  train then list the strongest words per topic -> topics.txt

Defaults mirror the reference experimental protocol: alpha = beta = 0.01,
convergence threshold 1 on consecutive training perplexity, at most 1000
iterations, word-level residual scheduling. All randomness flows from one
--seed (falling back to $TOPICFORGE_SEED, then 0).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus, load_docword, stats, write_docword, write_vocab
from .engines import ENGINES, TrainConfig, TrainResult, train, write_trace_csv
from .evaluation import cross_validate, synthesize_corpus, top_words, write_cv_csv
from .message_state import Hyperparams, write_matrix_csv
from .scheduler import ScheduleMode


@dataclass
class RunSpec:
    """One fully-resolved invocation; construct directly in tests if preferred."""

    command: str
    corpus_path: str | None = None
    vocab_path: str | None = None
    out_dir: str = "."
    engines: tuple[str, ...] = ("rbp",)
    topics: tuple[int, ...] = (10,)
    alpha: float = 0.01
    beta: float = 0.01
    max_iters: int = 1000
    threshold: float = 1.0
    seed: int = 0
    schedule: str = "word"
    folds: int = 10
    eval_every: int = 1
    jobs: int = 1
    top_n: int = 10
    residual_log: bool = False
    synth_docs: int = 200
    synth_vocab: int = 500
    synth_topics: int = 10
    synth_doc_len: int = 100


def _config(spec: RunSpec, num_topics: int, seed: int | None = None) -> TrainConfig:
    return TrainConfig(
        hyper=Hyperparams(num_topics=num_topics, alpha=spec.alpha, beta=spec.beta),
        max_iters=spec.max_iters,
        convergence_threshold=spec.threshold,
        seed=spec.seed if seed is None else seed,
        schedule_mode=ScheduleMode.parse(spec.schedule),
        eval_every=spec.eval_every,
    )


def _load_corpus(spec: RunSpec) -> Corpus:
    return load_docword(spec.corpus_path, spec.vocab_path)


def _write_model(result: TrainResult, out: Path) -> None:
    with open(out / "theta.csv", "w", encoding="utf-8") as fh:
        write_matrix_csv(result.final_model.theta, fh)
    with open(out / "phi.csv", "w", encoding="utf-8") as fh:
        write_matrix_csv(result.final_model.phi, fh)


def _run_train(spec: RunSpec, out: Path) -> int:
    corpus = _load_corpus(spec)
    result = train(spec.engines[0], corpus, _config(spec, spec.topics[0]))
    with open(out / "trace.csv", "w", encoding="utf-8") as fh:
        write_trace_csv(result.trace, fh)
    _write_model(result, out)
    if spec.residual_log and result.residual_trace:
        with open(out / "residuals.csv", "w", encoding="utf-8") as fh:
            fh.write("iter,sum_residual,max_residual,argmax_unit\n")
            for it, (total, peak, unit) in enumerate(result.residual_trace, start=1):
                fh.write(f"{it},{total!r},{peak!r},{unit}\n")
    status = (f"converged at iteration {result.converged_at}"
              if result.converged_at else "did not converge")
    print(f"{spec.engines[0]} K={spec.topics[0]}: {status}, "
          f"final perplexity {result.final_perplexity:.3f}, "
          f"{result.train_seconds:.2f}s training")
    return 0


def _run_cv(spec: RunSpec, out: Path) -> int:
    corpus = _load_corpus(spec)
    report = cross_validate(corpus, spec.engines[0],
                            _config(spec, spec.topics[0]), spec.folds)
    with open(out / "cv_report.csv", "w", encoding="utf-8") as fh:
        write_cv_csv(report, fh)
    mean, std = report.aggregates()["pred_perplexity"]
    print(f"{spec.engines[0]} K={spec.topics[0]} {spec.folds}-fold: "
          f"predictive perplexity {mean:.3f} +- {std:.3f}")
    return 0


def _bench_one(corpus: Corpus, engine: str, num_topics: int,
               spec: RunSpec) -> tuple[str, int, TrainResult]:
    result = train(engine, corpus, _config(spec, num_topics))
    return engine, num_topics, result


def _run_bench(spec: RunSpec, out: Path) -> int:
    corpus = _load_corpus(spec)
    grid = [(engine, k) for engine in spec.engines for k in spec.topics]
    if spec.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_bench_one, [corpus] * len(grid),
                                    [e for e, _ in grid], [k for _, k in grid],
                                    [spec] * len(grid)))
    else:
        results = [_bench_one(corpus, engine, k, spec) for engine, k in grid]
    with open(out / "summary.csv", "w", encoding="utf-8") as fh:
        fh.write("engine,K,converged_at,train_seconds,final_perplexity\n")
        for engine, k, result in results:
            with open(out / f"trace_{engine}_k{k}.csv", "w", encoding="utf-8") as trace_fh:
                write_trace_csv(result.trace, trace_fh)
            conv = "" if result.converged_at is None else result.converged_at
            fh.write(f"{engine},{k},{conv},{result.train_seconds:.6f},"
                     f"{result.final_perplexity!r}\n")
            print(f"{engine} K={k}: converged_at={conv or '-'} "
                  f"perplexity={result.final_perplexity:.3f}")
    return 0


def _run_synth(spec: RunSpec, out: Path) -> int:
    corpus = synthesize_corpus(spec.synth_docs, spec.synth_vocab,
                               spec.synth_topics, spec.synth_doc_len, spec.seed)
    with open(out / "docword.txt", "w", encoding="utf-8") as fh:
        write_docword(corpus, fh)
    with open(out / "vocab.txt", "w", encoding="utf-8") as fh:
        write_vocab(corpus, fh)
    summary = stats(corpus)
    print(f"wrote {corpus!r} (mean tokens/doc {summary.mean_tokens_per_doc:.1f})")
    return 0


def _run_topwords(spec: RunSpec, out: Path) -> int:
    corpus = _load_corpus(spec)
    result = train(spec.engines[0], corpus, _config(spec, spec.topics[0]))
    vocab = corpus.vocabulary or [f"word_{i + 1}" for i in range(corpus.vocab_size)]
    table = top_words(result.final_model.phi, vocab, spec.top_n)
    text = table.to_text()
    with open(out / "topics.txt", "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    return 0


_COMMANDS = {
    "train": _run_train,
    "cv": _run_cv,
    "bench": _run_bench,
    "synth": _run_synth,
    "topwords": _run_topwords,
}


def run(spec: RunSpec) -> int:
    """Execute a resolved RunSpec; returns the process exit status."""
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _COMMANDS[spec.command](spec, out)


def _default_seed() -> int:
    return int(os.environ.get("TOPICFORGE_SEED", "0"))


def _add_corpus_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--corpus", required=True, help="docword file (UCI bag-of-words)")
    sub.add_argument("--vocab", default=None, help="vocabulary file, one word per line")


def _add_train_args(sub: argparse.ArgumentParser, multi_engine: bool) -> None:
    if multi_engine:
        sub.add_argument("--engines", default="sbp,rbp,gs,vb",
                         help="comma-separated engine names")
        sub.add_argument("--topics", default="10,20,30,40,50",
                         help="comma-separated topic counts")
    else:
        sub.add_argument("--engine", default="rbp", choices=ENGINES)
        sub.add_argument("--topics", type=int, default=10)
    sub.add_argument("--alpha", type=float, default=0.01)
    sub.add_argument("--beta", type=float, default=0.01)
    sub.add_argument("--max-iters", type=int, default=1000)
    sub.add_argument("--threshold", type=float, default=1.0)
    sub.add_argument("--schedule", default="word", choices=["word", "doc", "entry"])
    sub.add_argument("--eval-every", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topicforge",
        description="Topic-model training engines and convergence benchmarks")
    parser.add_argument("--seed", type=int, default=None,
                        help="base seed (default: $TOPICFORGE_SEED or 0)")
    parser.add_argument("--out", default=".", help="output directory")
    commands = parser.add_subparsers(dest="command", required=True)

    train_p = commands.add_parser("train", help="train one engine")
    _add_corpus_args(train_p)
    _add_train_args(train_p, multi_engine=False)
    train_p.add_argument("--residual-log", action="store_true",
                         help="also write per-iteration residual summaries (rbp)")

    cv_p = commands.add_parser("cv", help="k-fold cross-validation")
    _add_corpus_args(cv_p)
    _add_train_args(cv_p, multi_engine=False)
    cv_p.add_argument("--folds", type=int, default=10)

    bench_p = commands.add_parser("bench", help="engine x K comparison grid")
    _add_corpus_args(bench_p)
    _add_train_args(bench_p, multi_engine=True)
    bench_p.add_argument("--jobs", type=int, default=1,
                         help="independent runs to execute in parallel")

    synth_p = commands.add_parser("synth", help="generate a synthetic corpus")
    synth_p.add_argument("--docs", type=int, default=200)
    synth_p.add_argument("--vocab-size", type=int, default=500)
    synth_p.add_argument("--true-topics", type=int, default=10)
    synth_p.add_argument("--doc-length", type=int, default=100)

    top_p = commands.add_parser("topwords", help="strongest words per topic")
    _add_corpus_args(top_p)
    _add_train_args(top_p, multi_engine=False)
    top_p.add_argument("--n", type=int, default=10, help="words per topic")
    return parser


def spec_from_args(args: argparse.Namespace) -> RunSpec:
    seed = args.seed if args.seed is not None else _default_seed()
    spec = RunSpec(command=args.command, out_dir=args.out, seed=seed)
    if args.command == "synth":
        spec.synth_docs = args.docs
        spec.synth_vocab = args.vocab_size
        spec.synth_topics = args.true_topics
        spec.synth_doc_len = args.doc_length
        return spec
    spec.corpus_path = args.corpus
    spec.vocab_path = args.vocab
    spec.alpha = args.alpha
    spec.beta = args.beta
    spec.max_iters = args.max_iters
    spec.threshold = args.threshold
    spec.schedule = args.schedule
    spec.eval_every = args.eval_every
    if args.command == "bench":
        spec.engines = tuple(e.strip() for e in args.engines.split(","))
        spec.topics = tuple(int(k) for k in args.topics.split(","))
        spec.jobs = args.jobs
    else:
        spec.engines = (args.engine,)
        spec.topics = (args.topics,)
    if args.command == "cv":
        spec.folds = args.folds
    if args.command == "train":
        spec.residual_log = args.residual_log
    if args.command == "topwords":
        spec.top_n = args.n
    return spec


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    spec = spec_from_args(args)
    for engine in spec.engines:
        if engine not in ENGINES:
            parser.error(f"unknown engine {engine!r}; choose from {', '.join(ENGINES)}")
    try:
        return run(spec)
    except Exception as exc:  # surface one-line reason, fail with status 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

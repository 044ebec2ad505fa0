import numpy as np
import pytest

from topicforge import load_docword
from topicforge.cli import build_parser, main, spec_from_args
from topicforge.engines import read_trace_csv
from topicforge.evaluation import read_cv_csv
from topicforge.message_state import read_matrix_csv


@pytest.fixture(scope="module")
def corpus_files(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    code = main(["--seed", "7", "--out", str(out), "synth", "--docs", "30",
                 "--vocab-size", "40", "--true-topics", "3", "--doc-length", "25"])
    assert code == 0
    return out / "docword.txt", out / "vocab.txt"


def test_synth_output_parses(corpus_files):
    docword, vocab = corpus_files
    corpus = load_docword(docword, vocab)
    assert corpus.num_docs == 30
    assert corpus.vocab_size == 40
    assert corpus.total_tokens == 30 * 25
    assert len(corpus.vocabulary) == 40


def test_train_writes_trace_and_model(tmp_path, corpus_files):
    docword, vocab = corpus_files
    code = main(["--seed", "3", "--out", str(tmp_path), "train",
                 "--corpus", str(docword), "--vocab", str(vocab),
                 "--engine", "rbp", "--topics", "3", "--max-iters", "10",
                 "--residual-log"])
    assert code == 0
    with open(tmp_path / "trace.csv") as fh:
        trace = read_trace_csv(fh)
    assert trace and trace[0].iteration == 1
    with open(tmp_path / "theta.csv") as fh:
        theta = read_matrix_csv(fh)
    with open(tmp_path / "phi.csv") as fh:
        phi = read_matrix_csv(fh)
    assert theta.shape == (30, 3)
    assert phi.shape == (40, 3)
    np.testing.assert_allclose(theta.sum(axis=1), 1.0, atol=1e-10)
    np.testing.assert_allclose(phi.sum(axis=0), 1.0, atol=1e-10)
    residuals = (tmp_path / "residuals.csv").read_text().splitlines()
    assert residuals[0] == "iter,sum_residual,max_residual,argmax_unit"
    assert len(residuals) == len(trace) + 1


def test_missing_corpus_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["train", "--topics", "3"])
    assert info.value.code == 2


def test_unknown_engine_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["train", "--corpus", "x", "--engine", "cvb0"])
    assert info.value.code == 2


def test_unknown_bench_engine_is_usage_error(corpus_files):
    docword, _ = corpus_files
    with pytest.raises(SystemExit) as info:
        main(["bench", "--corpus", str(docword), "--engines", "sbp,warp"])
    assert info.value.code == 2


def test_unreadable_corpus_is_runtime_error(tmp_path, capsys):
    code = main(["--out", str(tmp_path), "train", "--corpus",
                 str(tmp_path / "missing.txt"), "--topics", "2"])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_bench_grid_outputs(tmp_path, corpus_files):
    docword, _ = corpus_files
    code = main(["--seed", "5", "--out", str(tmp_path), "bench",
                 "--corpus", str(docword), "--engines", "sbp,gs",
                 "--topics", "2,3", "--max-iters", "5"])
    assert code == 0
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert lines[0] == "engine,K,converged_at,train_seconds,final_perplexity"
    assert len(lines) == 5
    for engine in ("sbp", "gs"):
        for k in (2, 3):
            with open(tmp_path / f"trace_{engine}_k{k}.csv") as fh:
                assert read_trace_csv(fh)


def test_bench_parallel_matches_serial(tmp_path, corpus_files):
    docword, _ = corpus_files
    serial, parallel = tmp_path / "serial", tmp_path / "parallel"
    for out, jobs in ((serial, "1"), (parallel, "2")):
        code = main(["--seed", "5", "--out", str(out), "bench",
                     "--corpus", str(docword), "--engines", "sbp,rbp",
                     "--topics", "2", "--max-iters", "5", "--jobs", jobs])
        assert code == 0
    for engine in ("sbp", "rbp"):
        a = (serial / f"trace_{engine}_k2.csv").read_text()
        b = (parallel / f"trace_{engine}_k2.csv").read_text()
        assert strip_elapsed(a) == strip_elapsed(b)


def strip_elapsed(csv_text):
    rows = []
    for line in csv_text.splitlines():
        cols = line.split(",")
        rows.append(",".join(cols[:1] + cols[2:]))
    return "\n".join(rows)


def test_cv_report_written(tmp_path, corpus_files):
    docword, _ = corpus_files
    code = main(["--seed", "2", "--out", str(tmp_path), "cv",
                 "--corpus", str(docword), "--engine", "gs", "--topics", "2",
                 "--folds", "3", "--max-iters", "5"])
    assert code == 0
    with open(tmp_path / "cv_report.csv") as fh:
        rows, summary = read_cv_csv(fh)
    assert len(rows) == 3
    assert "mean" in summary and "std" in summary


def test_topwords_output(tmp_path, corpus_files):
    docword, vocab = corpus_files
    code = main(["--seed", "2", "--out", str(tmp_path), "topwords",
                 "--corpus", str(docword), "--vocab", str(vocab),
                 "--topics", "3", "--n", "4", "--max-iters", "5"])
    assert code == 0
    text = (tmp_path / "topics.txt").read_text()
    assert text.count("topic ") == 3


def test_seed_falls_back_to_environment(monkeypatch):
    monkeypatch.setenv("TOPICFORGE_SEED", "123")
    args = build_parser().parse_args(["train", "--corpus", "x"])
    assert spec_from_args(args).seed == 123
    args = build_parser().parse_args(["--seed", "9", "train", "--corpus", "x"])
    assert spec_from_args(args).seed == 9


def test_train_flag_defaults():
    args = build_parser().parse_args(["train", "--corpus", "x", "--engine", "rbp"])
    spec = spec_from_args(args)
    assert spec.alpha == 0.01 and spec.beta == 0.01
    assert spec.threshold == 1.0
    assert spec.max_iters == 1000
    assert spec.schedule == "word"
    assert spec.eval_every == 1


def test_bench_default_grid():
    args = build_parser().parse_args(["bench", "--corpus", "x"])
    spec = spec_from_args(args)
    assert spec.engines == ("sbp", "rbp", "gs", "vb")
    assert spec.topics == (10, 20, 30, 40, 50)

"""Test the command-line workflow from import to evaluation."""
import json

import pytest
from click.testing import CliRunner
from loguru import logger

from d2t.cli import cli
from d2t.evaluation import NOT_COMPUTED
from d2t.main import main
from d2t.utils.file_utils import read_jsonl

QUIET = ["--log-file", "", "--log-level", "WARNING"]


@pytest.fixture
def runner():
    yield CliRunner(mix_stderr=False)
    # the CLI rebinds loguru to the runner's stderr
    logger.remove()


@pytest.fixture
def workspace(tmp_path, sample_dir, runner):
    """An imported corpus plus the majority tables and rules."""
    corpus = tmp_path / "corpus.jsonl"
    result = runner.invoke(cli, QUIET + ["import", "--xml", str(sample_dir), "--out", str(corpus)])
    assert result.exit_code == 0, result.stderr
    models = tmp_path / "models"
    for task in ("rules", "ordering", "structuring", "lex"):
        result = runner.invoke(cli, QUIET + ["train", "--corpus", str(corpus), "--task", task, "--out", str(models)])
        assert result.exit_code == 0, f"train {task}: {result.stderr}"
    return tmp_path, corpus, models


def test_import_writes_corpus_and_manifest(workspace):
    tmp_path, corpus, models = workspace
    assert len(read_jsonl(corpus)) == 20
    manifest = json.loads((tmp_path / "corpus.manifest.json").read_text())
    assert manifest["corpus_version"].startswith("sha1:")
    assert manifest["outputs"]["corpus"] == str(corpus)
    for name in ("realization.rules.jsonl", "ordering.majority.jsonl", "structuring.majority.jsonl",
                 "lexicalization.templates.jsonl", "manifest.json"):
        assert (models / name).exists(), f"missing {name}"


def test_run_and_eval(workspace, runner):
    """Majority run over the test split, scored with BLEU."""
    tmp_path, corpus, models = workspace
    out = tmp_path / "runs" / "majority"
    result = runner.invoke(cli, QUIET + ["run", "--corpus", str(corpus), "--models", str(models), "--out", str(out)])
    assert result.exit_code == 0, result.stderr
    records = read_jsonl(out / "run.jsonl")
    assert [r["eid"] for r in records] == ["test/Id17", "test/Id18", "test/Id19", "test/Id20"]
    assert len((out / "text.txt").read_text().splitlines()) == 4
    assert json.loads((out / "manifest.json").read_text())["seed"] == 13

    result = runner.invoke(cli, QUIET + ["eval", "--run", str(out), "--refs", str(corpus), "--domains"])
    assert result.exit_code == 0, result.stderr
    logger.info(f"\n{result.stdout}")
    text = (out / "eval.bleu.txt").read_text()
    assert NOT_COMPUTED in text
    assert "per domain" in text
    assert (out / "eval.bleu.json").exists()
    assert (out / "eval.bleu.manifest.json").exists()


def test_full_oracle_run_scores_100(workspace, runner):
    tmp_path, corpus, models = workspace
    out = tmp_path / "runs" / "gold"
    result = runner.invoke(
        cli, QUIET + ["run", "--corpus", str(corpus), "--models", str(models), "--oracle-upto", "reg", "--out", str(out)]
    )
    assert result.exit_code == 0, result.stderr
    result = runner.invoke(cli, QUIET + ["eval", "--run", str(out), "--refs", str(corpus)])
    assert result.exit_code == 0, result.stderr
    assert "100.00" in (out / "eval.bleu.txt").read_text()


def test_report_and_extract(workspace, runner):
    tmp_path, corpus, models = workspace
    out = tmp_path / "report"
    result = runner.invoke(
        cli, QUIET + ["report", "--corpus", str(corpus), "--models", str(models), "--seeds", "2", "--out", str(out)]
    )
    assert result.exit_code == 0, result.stderr
    assert "ordering/majority" in (out / "report.txt").read_text()

    data = tmp_path / "data"
    result = runner.invoke(
        cli, QUIET + ["extract", "--corpus", str(corpus), "--task", "ordering", "--out", str(data), "--sizes"]
    )
    assert result.exit_code == 0, result.stderr
    assert (data / "ordering.train.jsonl").exists()
    # the sample is far smaller than the published corpus
    assert "published" in (data / "sizes.txt").read_text()


def test_exit_codes(workspace, runner):
    """Usage errors exit with 2, runtime failures with 1."""
    tmp_path, corpus, models = workspace
    assert main(QUIET + ["import", "--out", str(tmp_path / "x.jsonl")]) == 2
    assert main(QUIET + ["run", "--corpus", str(corpus), "--structuring", "gold", "--out", str(tmp_path / "r")]) == 2
    assert main(QUIET + ["train", "--corpus", str(corpus), "--task", "reg", "--profile", "full", "--out", str(models)]) == 2
    assert main(QUIET + ["eval", "--run", str(models), "--refs", str(corpus)]) == 1
    logger.remove()

    result = runner.invoke(cli, QUIET + ["run", "--corpus", str(corpus), "--lex", "neural", "--out", str(tmp_path / "n")])
    assert result.exit_code == 1

"""Tests for stage-level evaluations and run scoring."""
import pytest
from loguru import logger

from d2t.experiments import (
    evaluate_random,
    evaluate_run,
    evaluate_stage,
    ordering_predictor,
    reg_predictor,
    stage_table,
    structuring_predictor,
)
from d2t.structuring import structure_majority_train


def _test_sets(datasets):
    return {task: splits[2] for task, splits in datasets.items() if task != "e2e"}


def test_ordering_majority_on_test(datasets, resources):
    report = evaluate_stage(datasets["ordering"][2], ordering_predictor("majority", resources.order_model))
    assert report.all.score == 1.0
    assert report.all.count == 4
    assert report.seen.score == 1.0 and report.unseen.score == 1.0


def test_structuring_majority_on_test(datasets):
    """The unseen two-triple set gets two sentences where the gold has one."""
    model = structure_majority_train(datasets["structuring"][0])
    report = evaluate_stage(datasets["structuring"][2], structuring_predictor("majority", model))
    logger.info(f"structuring: all={report.all.score} seen={report.seen.score} unseen={report.unseen.score}")
    assert report.all.score == pytest.approx(0.75)
    assert report.seen.score == 1.0
    assert report.unseen.score == 0.5
    assert report.domains["Artist"].count == 2


def test_random_engines_over_seeds(datasets):
    scores = evaluate_random(datasets["ordering"][2], ordering_predictor("random"))
    assert set(scores) == {"all", "seen", "unseen"}
    assert len(scores["all"]) == 5
    assert all(0.0 <= s <= 1.0 for s in scores["all"])


def test_empty_dataset_is_rejected(datasets):
    empty = datasets["ordering"][2].model_copy(update={"instances": ()})
    with pytest.raises(ValueError):
        evaluate_stage(empty, ordering_predictor("random"))


def test_reg_predictor(mocker, datasets):
    instances = {i.source[0]: i for i in datasets["reg"][2].instances}
    names = reg_predictor("onlynames")
    assert names(instances["Ace_Wilder"], 0) == ["Ace", "Wilder"]
    assert names(instances["1982"], 0) == ["1982"]

    model = mocker.Mock()
    model.generate.return_value = ["she"]
    neural = reg_predictor("neuralreg", model, {"Ace_Wilder"})
    assert neural(instances["Ace_Wilder"], 0) == ["she"]
    assert neural(instances["Sweden"], 0) == ["Sweden"]


def test_stage_table(datasets, resources):
    results = stage_table(_test_sets(datasets), resources, seeds=(0, 1, 2, 3, 4))
    names = [name for name, _ in results.reports] + [name for name, _, _ in results.seeded]
    logger.info(f"\n{results.format()}")
    assert set(names) == {
        "ordering/random", "ordering/majority", "structuring/random", "structuring/majority",
        "lex/random", "lex/majority", "reg/onlynames",
    }
    assert "±" in results.format()


def test_evaluate_run(corpus):
    """Gold texts as system output score 100 BLEU."""
    records = [{"eid": e.eid, "text": e.lexes[0].text} for e in corpus.split("test")]
    report = evaluate_run(records, corpus)
    assert report.all.score == pytest.approx(100.0)
    assert report.unseen.count == 2

    with pytest.raises(KeyError):
        evaluate_run([{"eid": "test/Id99", "text": "nothing"}], corpus)

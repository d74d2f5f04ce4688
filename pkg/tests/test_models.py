"""Tests for the corpus models, tokenization helpers and frequency tables."""
import numpy as np
import pytest
from loguru import logger
from pydantic import ValidationError

from d2t.utils.frequency import FrequencyTable
from d2t.utils.models import (
    CorpusEntry,
    DatasetInstance,
    InvariantError,
    LexEntry,
    ReferenceInstance,
    TaskDataset,
    Triple,
    TripleSet,
    partition_from_sizes,
    validate_partition,
)
from d2t.utils.text_utils import camel_case_words, detokenize, lower_tokens, tokenize


def _triple(s, p, o):
    return Triple(subject=s, predicate=p, object=o)


def test_validate_partition_accepts_contiguous_intervals():
    """Contiguous, ordered intervals covering every index are a partition."""
    assert validate_partition([[0, 1], [2]], 3) == ((0, 1), (2,))
    assert partition_from_sizes([2, 1]) == ((0, 1), (2,))


@pytest.mark.parametrize(
    "breaks,n",
    [([[0], [2]], 3), ([[0, 1], [1, 2]], 3), ([[0], []], 1), ([[1], [0]], 2), ([[0, 1]], 3)],
)
def test_validate_partition_rejects_gaps_and_overlaps(breaks, n):
    """Gaps, overlaps, empty sentences, reordering and short covers all fail."""
    with pytest.raises(InvariantError):
        validate_partition(breaks, n)


def test_triple_fields_must_be_whitespace_free():
    with pytest.raises(ValidationError):
        _triple("Alan Bean", "birthPlace", "Wheeler,_Texas")
    with pytest.raises(ValidationError):
        _triple("", "birthPlace", "Wheeler,_Texas")


def test_tripleset_size_bounds():
    """A triple set holds between one and seven triples."""
    with pytest.raises(ValidationError):
        TripleSet(triples=(), domain="Astronaut")
    many = tuple(_triple(f"S{i}", "p", "o") for i in range(8))
    with pytest.raises(ValidationError):
        TripleSet(triples=many, domain="Astronaut")
    assert TripleSet(triples=many[:7], domain="Astronaut").size == 7


def test_reference_contexts_are_uncased():
    with pytest.raises(ValidationError):
        ReferenceInstance(entity="Alan_Bean", refex=("He",), pre_context=("Alan",))
    with pytest.raises(ValidationError):
        ReferenceInstance(entity="Alan_Bean", refex=())


def test_corpus_entry_rejects_non_permutation():
    """Every verbalization orders exactly the input triples."""
    a = _triple("Alan_Bean", "birthPlace", "Wheeler,_Texas")
    b = _triple("Alan_Bean", "occupation", "Test_pilot")
    lex = LexEntry(text="x", ordered_triples=(a,), sentence_breaks=((0,),), template=("ENTITY-1",))
    with pytest.raises(ValidationError):
        CorpusEntry(eid="e1", split="train", tripleset=TripleSet(triples=(a, b), domain="Astronaut"), lexes=(lex,))
    with pytest.raises(ValidationError):
        CorpusEntry(eid="e1", split="validation", tripleset=TripleSet(triples=(a,), domain="Astronaut"), lexes=(lex,))


def test_lex_entry_breaks_must_cover_order():
    a = _triple("Alan_Bean", "birthPlace", "Wheeler,_Texas")
    b = _triple("Alan_Bean", "occupation", "Test_pilot")
    with pytest.raises(ValidationError):
        LexEntry(text="x", ordered_triples=(a, b), sentence_breaks=((0,),), template=())


def test_dataset_instance_targets_and_pairs():
    """Targets are distinct with positive counts; pairs expand the counts."""
    with pytest.raises(ValidationError):
        DatasetInstance(eid="e", source=("a",), targets=(("x",), ("x",)), counts=(1, 1), domain="d", seen=True, size=1)
    with pytest.raises(ValidationError):
        DatasetInstance(eid="e", source=("a",), targets=(("x",),), counts=(0,), domain="d", seen=True, size=1)

    instance = DatasetInstance(
        eid="e", source=("a",), targets=(("x",), ("y",)), counts=(2, 1), domain="d", seen=True, size=1
    )
    ds = TaskDataset(task="ordering", split="train", instances=(instance,))
    logger.info(f"pairs: {ds.pairs()}")
    assert ds.pairs() == [(("a",), ("x",)), (("a",), ("x",)), (("a",), ("y",))]
    assert (ds.n_sources, ds.n_targets, ds.n_verbalizations) == (1, 2, 3)


def test_tokenize_splits_sentence_final_periods():
    """Periods glued to a word are split off; abbreviations stay whole."""
    tokens = tokenize("Aarhus Airport is located in Tirstrup. Tirstrup is in Denmark.")
    logger.info(f"tokens: {tokens}")
    assert tokens == ["Aarhus", "Airport", "is", "located", "in", "Tirstrup", ".", "Tirstrup", "is", "in", "Denmark", "."]
    assert tokenize("S.S.D. Potenza Calcio") == ["S.S.D.", "Potenza", "Calcio"]
    assert tokenize("Wheeler, Texas") == ["Wheeler", ",", "Texas"]
    assert tokenize("   ") == []
    assert lower_tokens(["He", "IS"]) == ("he", "is")


def test_camel_case_words():
    assert camel_case_words("birthPlace") == ["birth", "place"]
    assert camel_case_words("cityServed") == ["city", "served"]
    assert camel_case_words("club") == ["club"]


def test_detokenize_attaches_punctuation_and_capitalizes():
    text = detokenize(["the", "city", "of", "Aarhus", ",", "Denmark", ".", "it", "is", "big", "."])
    logger.info(f"detokenized: {text}")
    assert text == "The city of Aarhus, Denmark. It is big."


def test_frequency_table_majority_and_ties(tmp_path):
    """Ties resolve by the tie key, never by insertion order."""
    table = FrequencyTable(tie_key=str)
    table.add("k", "b", 2)
    table.add("k", "a", 2)
    table.add("k", "c", 1)
    assert table.candidates("k") == [("a", 2), ("b", 2), ("c", 1)]
    assert table.majority("k") == "a"
    assert table.majority("missing") is None
    assert table.sample("missing", np.random.default_rng(0)) is None
    assert table.sample("k", np.random.default_rng(0)) in {"a", "b", "c"}
    with pytest.raises(ValueError):
        table.add("k", "d", 0)

    path = tmp_path / "table.jsonl"
    assert table.save_jsonl(path, str, str) == 1
    loaded = FrequencyTable.load_jsonl(path, str, str, tie_key=str)
    assert loaded.candidates("k") == table.candidates("k")

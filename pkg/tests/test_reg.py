"""Tests for referring expression generation."""
import pytest
from loguru import logger

from d2t.lexicalization import bind_entities, template_from_string, template_parse
from d2t.neural.training import TrainingConfig
from d2t.reg import (
    UnknownEntityError,
    UntrainedModelError,
    only_names,
    realize_literal,
    reg_resolve,
    reg_train,
)
from d2t.utils.models import Triple


@pytest.mark.parametrize(
    "entity,expected",
    [
        ("Massimo_Drago", "Massimo Drago"),
        ('"solo_singer"', "solo singer"),
        ('"Aarhus,_Denmark"', "Aarhus, Denmark"),
        ("S.S.D._Potenza_Calcio", "S.S.D. Potenza Calcio"),
    ],
)
def test_only_names(entity, expected):
    assert only_names(entity) == expected


@pytest.mark.parametrize(
    "entity,expected",
    [
        ("1982", "1982"),
        ('"1982"', "1982"),
        ("1956-01-01", "January 1, 1956"),
        ("-3.5", "-3.5"),
        ("1956-13-01", None),
        ("Ace_Wilder", None),
    ],
)
def test_realize_literal(entity, expected):
    assert realize_literal(entity) == expected


def _drago_template():
    template = template_from_string("ENTITY-1 met ENTITY-2 and ENTITY-1 left .")
    return bind_entities(template, [Triple(subject="Massimo_Drago", predicate="club", object="Calcio_Catania")])


def test_gold_references_are_used_in_order(entries):
    """Each slot consumes the next gold reference of its entity."""
    lex = entries["3triples/Id7"].lexes[0]
    bound = bind_entities(template_parse(lex.template), lex.ordered_triples)
    referenced, decisions = reg_resolve(bound, gold_refs=lex.references)
    assert [d.policy for d in decisions] == ["gold"] * 6
    assert decisions[2].refex == ("his",)
    assert decisions[4].entity == "Massimo_Drago"
    assert not referenced.entity_indices()


def test_literals_and_names_without_a_model():
    bound = bind_entities(
        template_from_string("ENTITY-1 VP[aspect=simple,tense=past,voice=passive] bear in ENTITY-2 ."),
        [Triple(subject="Ace_Wilder", predicate="birthYear", object="1982")],
    )
    referenced, decisions = reg_resolve(bound, seen_entities={"Ace_Wilder"})
    assert [(d.policy, d.refex) for d in decisions] == [
        ("onlynames", ("Ace", "Wilder")),
        ("literal", ("1982",)),
    ]
    assert referenced.serialize()[0] == "Ace"


def test_neural_model_gets_realized_contexts(mocker):
    """Later slots see the references chosen for earlier ones."""
    model = mocker.Mock()
    model.generate.return_value = ["he"]
    _, decisions = reg_resolve(_drago_template(), model, seen_entities={"Massimo_Drago"})
    logger.info(f"decisions: {decisions}")
    assert [d.policy for d in decisions] == ["neural", "onlynames", "neural"]
    assert model.generate.call_count == 2
    pre, post, entity = model.generate.call_args.args
    assert pre == ("he", "met", "calcio", "catania", "and")
    assert post == ("left", ".")
    assert entity == "Massimo_Drago"


def test_neural_failures_fall_back_to_names(mocker):
    model = mocker.Mock()
    model.generate.side_effect = UnknownEntityError("Massimo_Drago")
    _, decisions = reg_resolve(_drago_template(), model, seen_entities={"Massimo_Drago"})
    assert [d.refex for d in decisions] == [("Massimo", "Drago"), ("Calcio", "Catania"), ("Massimo", "Drago")]

    model.generate.side_effect = None
    model.generate.return_value = []
    _, decisions = reg_resolve(_drago_template(), model, seen_entities={"Massimo_Drago"})
    assert decisions[0].policy == "onlynames"


def test_gold_takes_precedence_over_literals(entries):
    lex = entries["test/Id19"].lexes[0]
    bound = bind_entities(template_parse(lex.template), lex.ordered_triples)
    _, decisions = reg_resolve(bound, gold_refs=lex.references)
    assert all(d.policy == "gold" for d in decisions)


def test_untrained_model_falls_back(datasets):
    """A zero-epoch budget gives a model that refuses to generate."""
    model = reg_train(datasets["reg"][0], TrainingConfig.for_reg("desk", epochs=0))
    assert not model.trained
    assert "Massimo_Drago" in model.entities
    with pytest.raises(UntrainedModelError):
        model.generate(("<s>",), (".",), "Massimo_Drago")
    _, decisions = reg_resolve(_drago_template(), model, seen_entities={"Massimo_Drago"})
    assert {d.policy for d in decisions} == {"onlynames"}


@pytest.mark.slow
def test_neuralreg_trains_and_generates(datasets):
    cfg = TrainingConfig.for_reg("desk", epochs=15, emb_dim=16, hidden_dim=32, batch_size=8, beam=2)
    model = reg_train(datasets["reg"][0], cfg, dev=datasets["reg"][1], seed=1)
    assert model.trained
    assert model.history
    refex = model.generate(("<s>",), ("play", "for"), "Massimo_Drago")
    logger.info(f"refex: {refex}")
    assert isinstance(refex, list)
    assert all(tok in model.target_vocab.stoi for tok in refex)
    with pytest.raises(UnknownEntityError):
        model.generate((), (), "Not_In_Training")


@pytest.mark.slow
def test_neuralreg_memorises_its_training_references(datasets):
    """Without dropout the training references are reproduced and the loss falls."""
    ds = datasets["reg"][0]
    cfg = TrainingConfig.for_reg(
        "desk", epochs=80, patience=80, emb_dim=32, hidden_dim=64, batch_size=8, beam=2,
        learning_rate=3e-3, dropout_embeddings=0.0, dropout_hidden=0.0,
    )
    model = reg_train(ds, cfg, seed=0)
    instances = [i for i in ds.instances if i.reference is not None]
    hits = 0
    for instance in instances:
        ref = instance.reference
        generated = tuple(model.generate(ref.pre_context, ref.post_context, ref.entity))
        hits += generated in instance.targets
    accuracy = hits / len(instances)
    logger.info(f"NeuralREG training accuracy {accuracy:.3f} over {len(instances)} references")
    assert accuracy >= 0.95
    assert model.history[-1][1] < model.history[0][1]

"""End-to-end orchestration of the five stages, and the single-model mode."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Sequence, Set, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from d2t.corpus import canonical_linearize, canonical_order, distinct_entities
from d2t.lexicalization import (
    BindingError,
    Template,
    TemplateParseError,
    TemplateStore,
    bind_entities,
    fallback_template,
    lexicalize_neural,
    lookup_with_fallbacks,
    structure_of,
    template_parse,
)
from d2t.neural.engine import Translator
from d2t.neural.neuralreg import NeuralREG
from d2t.ordering import OrderModel, is_permutation, order_key, order_majority, order_neural, order_random
from d2t.realization import RuleTable, realize
from d2t.reg import only_names, reg_resolve
from d2t.structuring import StructModel, structure_majority, structure_neural, structure_random
from d2t.utils.models import Corpus, CorpusEntry, InvariantError, LexEntry, Partition, Triple, TripleSet, validate_partition
from d2t.utils.text_utils import detokenize

STAGES = ("ordering", "structuring", "lexicalization", "reg")
PLANNING_STAGES = ("ordering", "structuring", "lexicalization")

StageEngine = Literal["random", "majority", "neural", "gold"]


class PipelineConfig(BaseModel):
    """Engine per stage, oracle prefix, mode and seed."""

    model_config = ConfigDict(frozen=True)

    mode: Literal["pipeline", "e2e"] = "pipeline"
    ordering: StageEngine = "majority"
    structuring: StageEngine = "majority"
    lexicalization: StageEngine = "majority"
    reg: Literal["onlynames", "neuralreg", "gold"] = "onlynames"
    oracle_upto: Optional[Literal["ordering", "structuring", "lexicalization", "reg"]] = Field(
        None, description="Inject gold output for every stage up to and including this one"
    )
    seed: int = 13

    @model_validator(mode="after")
    def _gold_is_a_prefix(self) -> "PipelineConfig":
        engines = self.engines()
        seen_model = False
        for stage in PLANNING_STAGES:
            if engines[stage] != "gold":
                seen_model = True
            elif seen_model:
                raise ValueError(f"gold {stage} needs gold output for every earlier planning stage")
        return self

    def engines(self) -> Dict[str, str]:
        """Effective engine per stage after applying ``oracle_upto``."""
        engines = {stage: getattr(self, stage) for stage in STAGES}
        if self.oracle_upto is not None:
            for stage in STAGES[: STAGES.index(self.oracle_upto) + 1]:
                engines[stage] = "gold"
        return engines

    def needs_gold(self) -> bool:
        return "gold" in self.engines().values()


@dataclass
class PipelineResources:
    """Trained models the engines draw on. Missing majority tables act as empty ones."""

    order_model: Optional[OrderModel] = None
    struct_model: Optional[StructModel] = None
    template_store: Optional[TemplateStore] = None
    rules: Optional[RuleTable] = None
    order_translator: Optional[Translator] = None
    struct_translator: Optional[Translator] = None
    lex_translator: Optional[Translator] = None
    reg_model: Optional[NeuralREG] = None
    seen_entities: Set[str] = field(default_factory=set)
    e2e_translator: Optional[Translator] = None

    def validate(self, cfg: PipelineConfig) -> None:
        """
        Raises:
            ValueError: If a neural engine has no model loaded.
        """
        if cfg.mode == "e2e":
            if self.e2e_translator is None:
                raise ValueError("e2e mode needs an end-to-end model")
            return
        engines = cfg.engines()
        required = {
            "ordering": self.order_translator,
            "structuring": self.struct_translator,
            "lexicalization": self.lex_translator,
        }
        missing = [stage for stage, model in required.items() if engines[stage] == "neural" and model is None]
        if engines["reg"] == "neuralreg" and self.reg_model is None:
            missing.append("reg")
        if missing:
            raise ValueError(f"neural engines without a loaded model: {', '.join(missing)}")


class SlotTrace(BaseModel):
    model_config = ConfigDict(frozen=True)

    entity: str
    index: int
    policy: str
    refex: Tuple[str, ...]


class PipelineTrace(BaseModel):
    """Per-stage outputs of one run, fallbacks included."""

    model_config = ConfigDict(frozen=True)

    engines: Dict[str, str]
    ordered: Tuple[Triple, ...] = ()
    partition: Partition = ()
    template: Tuple[str, ...] = ()
    referenced: Tuple[str, ...] = ()
    slots: Tuple[SlotTrace, ...] = ()
    text: str = ""
    fallbacks: Dict[str, bool] = Field(default_factory=dict)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def _gold(gold: Optional[LexEntry], stage: str) -> LexEntry:
    if gold is None:
        raise ValueError(f"gold {stage} requested without a gold verbalization")
    return gold


def _order(
    ts: TripleSet, engine: str, res: PipelineResources, seed: int, gold: Optional[LexEntry]
) -> Tuple[List[Triple], bool]:
    if engine == "gold":
        return list(_gold(gold, "ordering").ordered_triples), False
    if engine == "random":
        return order_random(ts, seed), False
    if engine == "neural":
        assert res.order_translator is not None
        return order_neural(res.order_translator, ts, seed), False
    model = res.order_model or OrderModel()
    return order_majority(model, ts), order_key(ts.triples) not in model.table


def _structure(
    ordered: List[Triple], engine: str, res: PipelineResources, seed: int, gold: Optional[LexEntry]
) -> Tuple[Partition, bool]:
    if engine == "gold":
        return _gold(gold, "structuring").sentence_breaks, False
    if engine == "random":
        return structure_random(ordered, seed), False
    if engine == "neural":
        assert res.struct_translator is not None
        return structure_neural(res.struct_translator, ordered)
    model = res.struct_model or StructModel()
    key = tuple(t.predicate for t in ordered)
    return structure_majority(model, ordered), key not in model.table


def _lexicalize(
    struct: List[List[Triple]], engine: str, res: PipelineResources, seed: int, gold: Optional[LexEntry]
) -> Tuple[Template, bool]:
    store = res.template_store or TemplateStore()
    if engine == "gold":
        try:
            return template_parse(_gold(gold, "lexicalization").template), False
        except TemplateParseError as e:
            logger.warning(f"Gold template does not parse ({e}); using majority lookup")
            engine = "majority"
    if engine == "neural":
        assert res.lex_translator is not None
        return lexicalize_neural(res.lex_translator, struct, store, seed)
    template, fallbacks = lookup_with_fallbacks(struct, store, engine, seed)
    return template, bool(fallbacks)


def _clause_template(struct: List[List[Triple]]) -> Template:
    ranks = {e: i + 1 for i, e in enumerate(distinct_entities([t for s in struct for t in s]))}
    template = Template()
    for sentence in struct:
        template = template + fallback_template(sentence, ranks)
    return template


def run_pipeline(
    ts: TripleSet,
    cfg: PipelineConfig,
    resources: Optional[PipelineResources] = None,
    gold: Optional[LexEntry] = None,
) -> Tuple[str, PipelineTrace]:
    """Verbalize a triple set stage by stage.

    Stage failures resolve to fallbacks recorded on the trace: a non-permuting
    order becomes the canonical order, an invalid partition one sentence per
    triple, and an unbindable template the clause-per-triple template.

    Args:
        ts: Input triple set.
        cfg: Engines and seed.
        resources: Loaded models; empty majority tables when None.
        gold: Gold verbalization for oracle stages.

    Returns:
        Tuple[str, PipelineTrace]: Final text and per-stage trace.
    """
    res = resources or PipelineResources()
    engines = cfg.engines()
    fallbacks: Dict[str, bool] = {}

    ordered, fallbacks["ordering"] = _order(ts, engines["ordering"], res, cfg.seed, gold)
    if not is_permutation(ordered, ts):
        logger.warning("Ordering output is not a permutation of the input; using canonical order")
        ordered, fallbacks["ordering"] = canonical_order(ts.triples), True

    partition, fallbacks["structuring"] = _structure(ordered, engines["structuring"], res, cfg.seed, gold)
    try:
        partition = validate_partition(partition, len(ordered))
    except InvariantError as e:
        logger.warning(f"Invalid partition ({e}); one sentence per triple")
        partition, fallbacks["structuring"] = tuple((i,) for i in range(len(ordered))), True

    struct = structure_of(ordered, partition)
    template, fallbacks["lexicalization"] = _lexicalize(struct, engines["lexicalization"], res, cfg.seed, gold)
    try:
        bound = bind_entities(template, ordered)
        fallbacks["binding"] = False
    except BindingError as e:
        logger.warning(f"Template does not bind ({e}); one clause per triple")
        template = _clause_template(struct)
        bound = bind_entities(template, ordered)
        fallbacks["binding"] = True

    gold_refs = _gold(gold, "reg").references if engines["reg"] == "gold" else None
    reg_model = res.reg_model if engines["reg"] == "neuralreg" else None
    referenced, decisions = reg_resolve(bound, reg_model, res.seen_entities, gold_refs)
    fallbacks["reg"] = any(d.policy == "onlynames" for d in decisions) and engines["reg"] != "onlynames"

    text = realize(referenced, res.rules or RuleTable())
    trace = PipelineTrace(
        engines=engines,
        ordered=tuple(ordered),
        partition=partition,
        template=tuple(template.serialize()),
        referenced=tuple(referenced.serialize()),
        slots=tuple(SlotTrace(entity=d.entity, index=d.index, policy=d.policy, refex=d.refex) for d in decisions),
        text=text,
        fallbacks=fallbacks,
    )
    return text, trace


def run_e2e(ts: TripleSet, m: Translator) -> str:
    """Decode text straight from the canonical linearization.

    An empty decode yields an empty string and a warning.
    """
    tokens = m.translate(canonical_linearize(ts))
    if not tokens:
        logger.warning(f"Empty end-to-end decode for {canonical_linearize(ts)}")
        return ""
    return detokenize(tokens)


# ---------------------------------------------------------------------------
# Corpus runs
# ---------------------------------------------------------------------------


def instance_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def keep_ratio(ts: TripleSet, trace: PipelineTrace) -> float:
    """Share of input entities the output still mentions.

    Pipeline traces count entities realized in a slot; end-to-end traces
    look for the entity name in the text.
    """
    entities = distinct_entities(ts.triples)
    if not entities:
        return 1.0
    if trace.engines.get("mode") == "e2e":
        lowered = trace.text.lower()
        kept = sum(only_names(e).lower() in lowered for e in entities)
    else:
        realized = {slot.entity for slot in trace.slots}
        kept = sum(e in realized for e in entities)
    return kept / len(entities)


def run_entry(entry: CorpusEntry, cfg: PipelineConfig, res: PipelineResources) -> Dict[str, Any]:
    """One run record ``{eid, config, text, trace}`` plus domain metadata."""
    if cfg.mode == "e2e":
        assert res.e2e_translator is not None
        text = run_e2e(entry.tripleset, res.e2e_translator)
        trace = PipelineTrace(
            engines={"mode": "e2e"}, ordered=entry.tripleset.triples, text=text, fallbacks={"e2e_empty": not text}
        )
    else:
        text, trace = run_pipeline(entry.tripleset, cfg, res, entry.lexes[0] if cfg.needs_gold() else None)
    return {
        "eid": entry.eid,
        "domain": entry.domain,
        "seen": entry.seen,
        "config": cfg.model_dump(),
        "text": text,
        "keep": keep_ratio(entry.tripleset, trace),
        "trace": trace.model_dump(mode="json"),
    }


def run_corpus(
    corpus: Corpus,
    split: str,
    cfg: PipelineConfig,
    resources: Optional[PipelineResources] = None,
    workers: int = 1,
) -> List[Dict[str, Any]]:
    """Run every entry of a split; records come back in input order.

    Each entry gets its own seed derived from ``cfg.seed`` and its position,
    so results do not depend on ``workers``.
    """
    res = resources or PipelineResources()
    res.validate(cfg)
    entries: Sequence[CorpusEntry] = corpus.split(split)
    configs = [cfg.model_copy(update={"seed": instance_seed(cfg.seed, i)}) for i in range(len(entries))]
    logger.info(f"Running {cfg.mode} over {len(entries)} {split} entries with {workers} worker(s)")
    if workers <= 1:
        return [run_entry(e, c, res) for e, c in zip(entries, configs)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda pair: run_entry(pair[0], pair[1], res), zip(entries, configs)))

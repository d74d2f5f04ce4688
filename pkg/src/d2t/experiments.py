"""Stage-level evaluations with gold input, one per pipeline step."""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from loguru import logger

from d2t.corpus import KNOWN_DOMAINS, delinearize_structured, delinearize_triples, structure_tokens
from d2t.evaluation import EvalReport, accuracy, bleu, format_report, format_seed_row
from d2t.lexicalization import TemplateStore, lexicalize_neural, lookup_with_fallbacks, structure_of
from d2t.neural.engine import Translator
from d2t.neural.neuralreg import NeuralREG
from d2t.ordering import OrderModel, order_majority, order_neural, order_random
from d2t.pipeline import PipelineResources
from d2t.reg import only_names, realize_literal
from d2t.structuring import StructModel, structure_majority, structure_neural, structure_random
from d2t.utils.models import Corpus, DatasetInstance, TaskDataset
from d2t.utils.text_utils import tokenize

Predictor = Callable[[DatasetInstance, int], Sequence[str]]
RANDOM_SEEDS = (0, 1, 2, 3, 4)


def _meta(ds: TaskDataset) -> Tuple[List[str], List[bool]]:
    return [i.domain for i in ds.instances], [i.seen for i in ds.instances]


def evaluate_stage(
    ds: TaskDataset, predict: Predictor, metric: str = "accuracy", seed: int = 0, known_domains=None
) -> EvalReport:
    """Score ``predict`` against the gold targets of every instance."""
    if not ds.instances:
        raise ValueError(f"no {ds.task}/{ds.split} instances to evaluate")
    preds = [list(predict(instance, seed)) for instance in ds.instances]
    golds = [list(instance.targets) for instance in ds.instances]
    domains, seen = _meta(ds)
    score = accuracy if metric == "accuracy" else bleu
    return score(preds, golds, domains, seen, known_domains)


def evaluate_random(
    ds: TaskDataset, predict: Predictor, metric: str = "accuracy", seeds: Sequence[int] = RANDOM_SEEDS
) -> Dict[str, List[float]]:
    """Per-bucket scores of a seeded engine over several seeds."""
    if len(seeds) < 5:
        logger.warning(f"Random engines are usually summarized over at least 5 seeds, got {len(seeds)}")
    scores: Dict[str, List[float]] = {"all": [], "seen": [], "unseen": []}
    for seed in seeds:
        report = evaluate_stage(ds, predict, metric, seed)
        for bucket in scores:
            value = getattr(report, bucket).score
            if value is not None:
                scores[bucket].append(value)
    return scores


# ---------------------------------------------------------------------------
# Predictors
# ---------------------------------------------------------------------------


def ordering_predictor(engine: str, model: Optional[OrderModel] = None, translator: Optional[Translator] = None) -> Predictor:
    def predict(instance: DatasetInstance, seed: int) -> List[str]:
        triples = delinearize_triples(instance.source)
        if engine == "random":
            ordered = order_random(triples, seed)
        elif engine == "neural":
            assert translator is not None
            ordered = order_neural(translator, triples, seed)
        else:
            ordered = order_majority(model or OrderModel(), triples)
        return [t.predicate for t in ordered]

    return predict


def structuring_predictor(
    engine: str, model: Optional[StructModel] = None, translator: Optional[Translator] = None
) -> Predictor:
    def predict(instance: DatasetInstance, seed: int) -> List[str]:
        ordered = delinearize_triples(instance.source)
        if engine == "random":
            partition = structure_random(ordered, seed)
        elif engine == "neural":
            assert translator is not None
            partition, _ = structure_neural(translator, ordered)
        else:
            partition = structure_majority(model or StructModel(), ordered)
        return structure_tokens([t.predicate for t in ordered], partition)

    return predict


def lexicalization_predictor(
    engine: str, store: Optional[TemplateStore] = None, translator: Optional[Translator] = None
) -> Predictor:
    def predict(instance: DatasetInstance, seed: int) -> List[str]:
        ordered, partition = delinearize_structured(instance.source)
        struct = structure_of(ordered, partition)
        if engine == "neural":
            assert translator is not None
            template, _ = lexicalize_neural(translator, struct, store or TemplateStore(), seed)
        else:
            template, _ = lookup_with_fallbacks(struct, store or TemplateStore(), engine, seed)
        return template.uncased().serialize()

    return predict


def reg_predictor(engine: str, model: Optional[NeuralREG] = None, seen_entities=None) -> Predictor:
    """OnlyNames, or NeuralREG for seen entities with OnlyNames otherwise."""
    seen = seen_entities or set()

    def predict(instance: DatasetInstance, seed: int) -> List[str]:
        ref = instance.reference
        entity = instance.source[0]
        literal = realize_literal(entity)
        if literal is not None:
            return tokenize(literal)
        if engine == "neuralreg" and model is not None and entity in seen and ref is not None:
            generated = model.generate(ref.pre_context, ref.post_context, entity)
            if generated:
                return generated
        return tokenize(only_names(entity))

    return predict


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


@dataclass
class StageResults:
    """Rows of a stage-level results table."""

    reports: List[Tuple[str, EvalReport]] = field(default_factory=list)
    seeded: List[Tuple[str, str, Dict[str, List[float]]]] = field(default_factory=list)

    def format(self) -> str:
        parts = [format_report(self.reports)] if self.reports else []
        parts.extend(format_seed_row(name, metric, scores) for name, metric, scores in self.seeded)
        return "\n".join(parts)


def stage_table(
    datasets: Dict[str, TaskDataset],
    resources: PipelineResources,
    seeds: Sequence[int] = RANDOM_SEEDS,
) -> StageResults:
    """Every engine of every stage on its own test dataset, with gold input.

    Random engines are run once per seed; neural rows appear only for the
    stages whose model is loaded in ``resources``.

    Args:
        datasets: Test datasets keyed by task name.
        resources: Majority tables and optional neural models.
        seeds: Seeds for the random engines.
    """
    results = StageResults()
    if "ordering" in datasets:
        ds = datasets["ordering"]
        results.seeded.append(("ordering/random", "accuracy", evaluate_random(ds, ordering_predictor("random"), seeds=seeds)))
        results.reports.append(("ordering/majority", evaluate_stage(ds, ordering_predictor("majority", resources.order_model))))
        if resources.order_translator is not None:
            predict = ordering_predictor("neural", translator=resources.order_translator)
            results.reports.append(("ordering/neural", evaluate_stage(ds, predict)))
    if "structuring" in datasets:
        ds = datasets["structuring"]
        results.seeded.append(
            ("structuring/random", "accuracy", evaluate_random(ds, structuring_predictor("random"), seeds=seeds))
        )
        results.reports.append(
            ("structuring/majority", evaluate_stage(ds, structuring_predictor("majority", resources.struct_model)))
        )
        if resources.struct_translator is not None:
            predict = structuring_predictor("neural", translator=resources.struct_translator)
            results.reports.append(("structuring/neural", evaluate_stage(ds, predict)))
    if "lexicalization" in datasets:
        ds = datasets["lexicalization"]
        store = resources.template_store
        results.seeded.append(
            ("lex/random", "bleu", evaluate_random(ds, lexicalization_predictor("random", store), "bleu", seeds))
        )
        results.reports.append(("lex/majority", evaluate_stage(ds, lexicalization_predictor("majority", store), "bleu")))
        if resources.lex_translator is not None:
            predict = lexicalization_predictor("neural", store, resources.lex_translator)
            results.reports.append(("lex/neural", evaluate_stage(ds, predict, "bleu")))
    if "reg" in datasets:
        ds = datasets["reg"]
        results.reports.append(("reg/onlynames", evaluate_stage(ds, reg_predictor("onlynames"))))
        if resources.reg_model is not None and resources.reg_model.trained:
            predict = reg_predictor("neuralreg", resources.reg_model, resources.seen_entities)
            results.reports.append(("reg/neuralreg", evaluate_stage(ds, predict)))
    return results


def evaluate_run(
    records: Sequence[Dict], corpus: Corpus, split: str = "test", metric: str = "bleu"
) -> EvalReport:
    """Score pipeline or end-to-end run records against the reference texts.

    Raises:
        KeyError: If a record names an entry missing from ``split``.
    """
    entries = corpus.by_eid()
    preds: List[List[str]] = []
    golds: List[List[List[str]]] = []
    domains: List[str] = []
    seen: List[bool] = []
    for record in records:
        key = (split, record["eid"])
        if key not in entries:
            logger.error(f"Run record {record['eid']} has no {split} entry in the corpus")
            raise KeyError(record["eid"])
        entry = entries[key]
        preds.append(tokenize(record["text"]))
        golds.append([tokenize(lex.text) for lex in entry.lexes])
        domains.append(entry.domain)
        seen.append(entry.seen)
    score = bleu if metric == "bleu" else accuracy
    return score(preds, golds, domains, seen, KNOWN_DOMAINS)

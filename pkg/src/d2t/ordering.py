"""Discourse ordering: the order in which input triples are verbalized."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, List, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from d2t.corpus import canonical_linearize, canonical_order, delinearize_triples
from d2t.utils.frequency import FrequencyTable
from d2t.utils.models import TaskDataset, Triple, TripleSet

if TYPE_CHECKING:
    from d2t.neural.engine import Translator

OrderKey = Tuple[str, ...]


def _joined(order: Tuple[str, ...]) -> str:
    return " ".join(order)


def order_key(triples: Sequence[Triple]) -> OrderKey:
    """Sorted predicate multiset."""
    return tuple(sorted(t.predicate for t in triples))


@dataclass
class OrderModel:
    """Gold predicate orders counted per predicate multiset."""

    table: FrequencyTable = field(default_factory=lambda: FrequencyTable(tie_key=_joined))

    def __len__(self) -> int:
        return len(self.table)

    def majority(self, key: OrderKey) -> Union[Tuple[str, ...], None]:
        return self.table.majority(key)

    def save(self, path: Union[str, Path]) -> int:
        return self.table.save_jsonl(path, list, list)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "OrderModel":
        return cls(table=FrequencyTable.load_jsonl(path, tuple, tuple, tie_key=_joined))


def _triples(ts: Union[TripleSet, Sequence[Triple]]) -> List[Triple]:
    return list(ts.triples if isinstance(ts, TripleSet) else ts)


def order_random(ts: Union[TripleSet, Sequence[Triple]], seed: int) -> List[Triple]:
    """Uniform random permutation, reproducible from ``seed``."""
    triples = _triples(ts)
    if not triples:
        raise ValueError("cannot order an empty triple set")
    rng = np.random.default_rng(seed)
    return [triples[i] for i in rng.permutation(len(triples))]


def order_majority_train(ds: TaskDataset) -> OrderModel:
    """Count every gold order per predicate multiset key."""
    model = OrderModel()
    for instance in ds.instances:
        key = order_key(delinearize_triples(instance.source))
        for target, count in zip(instance.targets, instance.counts):
            if tuple(sorted(target)) != key:
                logger.warning(f"Skipping order of {instance.eid}: not a permutation of its predicates")
                continue
            model.table.add(key, tuple(target), count)
    logger.info(f"Ordering model: {len(model)} predicate multisets")
    return model


def apply_predicate_order(
    triples: Sequence[Triple], predicates: Sequence[str], rng: Union[np.random.Generator, None] = None
) -> List[Triple]:
    """Consume input triples in the order of ``predicates``.

    Duplicate predicates take a uniformly random remaining match when ``rng``
    is given, else the first one in input order. Predicates with no remaining
    match are skipped; unconsumed triples are appended in canonical order.
    """
    remaining = list(triples)
    out: List[Triple] = []
    for predicate in predicates:
        matches = [i for i, t in enumerate(remaining) if t.predicate == predicate]
        if not matches:
            continue
        pick = matches[int(rng.integers(len(matches)))] if rng is not None and len(matches) > 1 else matches[0]
        out.append(remaining.pop(pick))
    return out + canonical_order(remaining)


def order_majority(m: OrderModel, ts: Union[TripleSet, Sequence[Triple]]) -> List[Triple]:
    """Most frequent order for the predicate multiset, else the input order."""
    triples = _triples(ts)
    best = m.majority(order_key(triples))
    if best is None:
        return triples
    return apply_predicate_order(triples, best)


def order_neural(m: "Translator", ts: Union[TripleSet, Sequence[Triple]], seed: int) -> List[Triple]:
    """Decode a predicate order from the canonical linearization and apply it."""
    triples = _triples(ts)
    predicted = m.translate(canonical_linearize(triples))
    logger.debug(f"Predicted order: {predicted}")
    return apply_predicate_order(triples, predicted, np.random.default_rng(seed))


def is_permutation(ordered: Sequence[Triple], ts: Union[TripleSet, Sequence[Triple]]) -> bool:
    return sorted(t.sort_key() for t in ordered) == sorted(t.sort_key() for t in _triples(ts))

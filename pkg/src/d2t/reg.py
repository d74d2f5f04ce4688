"""Referring expression generation for bound entity slots."""

import calendar
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Deque, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import regex as re
from loguru import logger

from d2t.corpus import reference_contexts
from d2t.lexicalization import BoundEntity, BoundTemplate, Template, Word
from d2t.neural.neuralreg import NeuralREG, UnknownEntityError, UntrainedModelError, train_neuralreg
from d2t.neural.training import TrainingConfig
from d2t.utils.models import ReferenceInstance, TaskDataset
from d2t.utils.text_utils import tokenize

__all__ = [
    "NeuralREG",
    "SlotDecision",
    "UnknownEntityError",
    "UntrainedModelError",
    "only_names",
    "realize_literal",
    "reg_generate",
    "reg_resolve",
    "reg_train",
]

_ISO_DATE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
_NUMBER = re.compile(r"^[+-]?\d+(?:\.\d+)?$")


def _unquote(entity: str) -> str:
    entity = entity.strip()
    if len(entity) >= 2 and entity[0] == entity[-1] == '"':
        return entity[1:-1]
    return entity


def only_names(entity: str) -> str:
    """The identifier with surrounding quotes stripped and underscores as spaces."""
    return " ".join(_unquote(entity).replace("_", " ").split())


def realize_literal(entity: str) -> Optional[str]:
    """Surface form of a date or number literal, None for anything else.

    ``yyyy-mm-dd`` becomes ``Month d, yyyy``; integers and decimals are kept
    as written.
    """
    value = _unquote(entity)
    match = _ISO_DATE.match(value)
    if match:
        year, month, day = (int(g) for g in match.groups())
        if 1 <= month <= 12 and 1 <= day <= 31:
            return f"{calendar.month_name[month]} {day}, {year}"
        return None
    if _NUMBER.match(value):
        return value
    return None


def reg_train(
    ds: TaskDataset,
    cfg: Optional[TrainingConfig] = None,
    dev: Optional[TaskDataset] = None,
    seed: int = 0,
) -> NeuralREG:
    """Train NeuralREG on the references of a ``reg`` dataset.

    Raises:
        ValueError: If the dataset has no references.
    """
    cfg = cfg or TrainingConfig.for_reg("desk")

    def examples(data: Optional[TaskDataset]) -> List[Tuple[Sequence[str], Sequence[str], str, Sequence[str]]]:
        if data is None:
            return []
        out = []
        for instance in data.instances:
            ref = instance.reference
            if ref is None:
                continue
            for _ in range(sum(instance.counts)):
                out.append((ref.pre_context, ref.post_context, ref.entity, ref.refex))
        return out

    train = examples(ds)
    if not train:
        raise ValueError("cannot train REG on an empty dataset")
    return train_neuralreg(train, cfg, seed=seed, dev_examples=examples(dev) or None)


def reg_generate(m: NeuralREG, pre: Sequence[str], post: Sequence[str], entity: str) -> List[str]:
    """Beam-decoded referring expression for ``entity`` between two contexts."""
    return m.generate(pre, post, entity)


@dataclass(frozen=True)
class SlotDecision:
    """How one slot was realized."""

    entity: str
    index: int
    policy: str
    refex: Tuple[str, ...]


def _gold_queues(gold_refs: Iterable[ReferenceInstance]) -> Dict[str, Deque[Tuple[str, ...]]]:
    queues: Dict[str, Deque[Tuple[str, ...]]] = defaultdict(deque)
    for ref in gold_refs:
        queues[ref.entity].append(tuple(ref.refex))
    return queues


def reg_resolve(
    bt: BoundTemplate,
    m: Optional[NeuralREG] = None,
    seen_entities: Optional[Set[str]] = None,
    gold_refs: Optional[Sequence[ReferenceInstance]] = None,
) -> Tuple[Template, List[SlotDecision]]:
    """Replace every entity slot with a referring expression, left to right.

    Each slot takes, in order of precedence: the next unused gold reference
    of its entity (when ``gold_refs`` is given), the date/number rule,
    NeuralREG for seen entities, and OnlyNames. Contexts are recomputed per
    slot, so later slots see the realization of earlier ones.

    Returns:
        Tuple[Template, List[SlotDecision]]: Tokens without entity slots, and
            the per-slot decisions.
    """
    seen = seen_entities or set()
    queues = _gold_queues(gold_refs) if gold_refs is not None else None
    serialized = bt.serialize()
    entities = bt.entities()
    realized: List[Tuple[str, ...]] = []
    decisions: List[SlotDecision] = []
    out: List = []

    slot = 0
    for tok in bt.tokens:
        if not isinstance(tok, BoundEntity):
            out.append(tok)
            continue
        refex: Tuple[str, ...] = ()
        policy = "onlynames"
        if queues is not None and queues.get(tok.entity):
            refex, policy = queues[tok.entity].popleft(), "gold"
        if not refex:
            literal = realize_literal(tok.entity)
            if literal is not None:
                refex, policy = tuple(tokenize(literal)), "literal"
        if not refex and m is not None and tok.entity in seen:
            pre, post = reference_contexts(serialized, entities, realized, slot)
            try:
                refex, policy = tuple(m.generate(pre, post, tok.entity)), "neural"
            except (UnknownEntityError, UntrainedModelError) as e:
                logger.warning(f"NeuralREG unavailable for {tok.entity}: {e!r}; using its name")
            if not refex:
                policy = "onlynames"
        if not refex:
            refex = tuple(tokenize(only_names(tok.entity))) or (tok.entity,)
            policy = "onlynames"
        realized.append(refex)
        decisions.append(SlotDecision(tok.entity, tok.index, policy, refex))
        out.extend(Word(w) for w in refex)
        slot += 1
    return Template(tuple(out)), decisions

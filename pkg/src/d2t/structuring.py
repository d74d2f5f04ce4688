"""Text structuring: split ordered triples into sentences."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from d2t.corpus import SNT_CLOSE, SNT_OPEN, delinearize_triples, linearize_ordered
from d2t.utils.frequency import FrequencyTable
from d2t.utils.models import Partition, TaskDataset, Triple, partition_from_sizes, validate_partition

if TYPE_CHECKING:
    from d2t.neural.engine import Translator

SeqKey = Tuple[str, ...]


def _partition_tie(partition: Partition) -> Tuple[int, str]:
    return (len(partition), repr(partition))


def parse_structure_tokens(tokens: Sequence[str]) -> Optional[Tuple[List[str], Partition]]:
    """Predicates and partition of ``<SNT> p .. </SNT>`` tokens, None if malformed."""
    predicates: List[str] = []
    sizes: List[int] = []
    current: Optional[int] = None
    for tok in tokens:
        if tok == SNT_OPEN:
            if current is not None:
                return None
            current = 0
        elif tok == SNT_CLOSE:
            if not current:
                return None
            sizes.append(current)
            current = None
        else:
            if current is None:
                return None
            predicates.append(tok)
            current += 1
    if current is not None or not sizes:
        return None
    return predicates, partition_from_sizes(sizes)


@dataclass
class StructModel:
    """Gold partitions counted per ordered predicate sequence.

    ``windows`` indexes every contiguous run of sentences of every stored
    partition by its predicate sequence, for inputs never seen whole.
    """

    table: FrequencyTable = field(default_factory=lambda: FrequencyTable(tie_key=_partition_tie))
    windows: FrequencyTable = field(default_factory=lambda: FrequencyTable(tie_key=_partition_tie))

    def __len__(self) -> int:
        return len(self.table)

    def add(self, key: SeqKey, partition: Partition, count: int = 1) -> None:
        self.table.add(key, partition, count)
        sizes = [len(s) for s in partition]
        offsets = np.cumsum([0] + sizes)
        for start in range(len(sizes)):
            for end in range(start + 1, len(sizes) + 1):
                sub = key[offsets[start] : offsets[end]]
                self.windows.add(sub, partition_from_sizes(sizes[start:end]), count)

    def save(self, path: Union[str, Path]) -> int:
        return self.table.save_jsonl(path, list, lambda p: [list(s) for s in p])

    @classmethod
    def load(cls, path: Union[str, Path]) -> "StructModel":
        table = FrequencyTable.load_jsonl(
            path, tuple, lambda p: tuple(tuple(s) for s in p), tie_key=_partition_tie
        )
        model = cls()
        for key in table.keys():
            for partition, count in table.candidates(key):
                model.add(key, partition, count)
        return model


def structure_random(ordered: Sequence[Triple], seed: int) -> Partition:
    """One of the 2^(n-1) contiguous partitions, uniformly."""
    if not ordered:
        raise ValueError("cannot structure an empty triple list")
    rng = np.random.default_rng(seed)
    cuts = rng.integers(0, 2, size=len(ordered) - 1)
    sizes = [1]
    for cut in cuts:
        if cut:
            sizes.append(1)
        else:
            sizes[-1] += 1
    return partition_from_sizes(sizes)


def structure_majority_train(ds: TaskDataset) -> StructModel:
    """Count gold partitions per ordered predicate sequence."""
    model = StructModel()
    for instance in ds.instances:
        key = tuple(t.predicate for t in delinearize_triples(instance.source))
        for target, count in zip(instance.targets, instance.counts):
            parsed = parse_structure_tokens(target)
            if parsed is None or tuple(parsed[0]) != key:
                logger.warning(f"Skipping structure of {instance.eid}: does not match its source")
                continue
            model.add(key, parsed[1], count)
    logger.info(f"Structuring model: {len(model)} predicate sequences")
    return model


def _shift(partition: Partition, offset: int) -> Partition:
    return tuple(tuple(i + offset for i in s) for s in partition)


def structure_majority(m: StructModel, ordered: Sequence[Triple]) -> Partition:
    """Most frequent partition; greedy longest-prefix cover for unseen sequences.

    Ties prefer fewer sentences, then the lexicographically smaller partition.
    """
    key = tuple(t.predicate for t in ordered)
    best = m.table.majority(key)
    if best is not None:
        return best
    partition: List[Tuple[int, ...]] = []
    pos = 0
    while pos < len(key):
        for end in range(len(key), pos, -1):
            found = m.windows.majority(key[pos:end])
            if found is not None:
                partition.extend(_shift(found, pos))
                pos = end
                break
        else:
            partition.append((pos,))
            pos += 1
    return tuple(partition)


def one_per_triple(n: int) -> Partition:
    return tuple((i,) for i in range(n))


def structure_neural(m: "Translator", ordered: Sequence[Triple]) -> Tuple[Partition, bool]:
    """Decode ``<SNT>``-segmented predicates and validate them.

    Returns:
        Tuple[Partition, bool]: The partition and whether the
            one-sentence-per-triple fallback fired.
    """
    decoded = m.translate(linearize_ordered(ordered))
    parsed = parse_structure_tokens(decoded)
    if parsed is None or parsed[0] != [t.predicate for t in ordered]:
        logger.warning(f"Invalid structure decode {decoded}; one sentence per triple")
        return one_per_triple(len(ordered)), True
    return validate_partition(parsed[1], len(ordered)), False


def flatten(partition: Partition) -> List[int]:
    return [i for sentence in partition for i in sentence]

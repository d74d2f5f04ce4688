"""Counted lookup tables shared by the majority and random engines."""

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Generic, Hashable, Iterator, List, Optional, Tuple, TypeVar, Union

import numpy as np
from loguru import logger

from d2t.utils.file_utils import iter_jsonl, write_jsonl

K = TypeVar("K", bound=Hashable)
V = TypeVar("V", bound=Hashable)


@dataclass
class FrequencyTable(Generic[K, V]):
    """Map each key to the values observed for it, with counts.

    Majority lookups break ties with ``tie_key`` (smallest wins), so results
    never depend on insertion order.
    """

    tie_key: Callable[[Any], Any] = repr
    _table: Dict[Any, Counter] = field(default_factory=lambda: defaultdict(Counter))

    def add(self, key: K, value: V, count: int = 1) -> None:
        if count < 1:
            raise ValueError(f"counts must be positive, got {count}")
        self._table[key][value] += count

    def __contains__(self, key: object) -> bool:
        return key in self._table

    def __len__(self) -> int:
        return len(self._table)

    def keys(self) -> Iterator[K]:
        return iter(self._table)

    def candidates(self, key: K) -> List[Tuple[V, int]]:
        """Values for ``key`` sorted by descending count, then tie key."""
        counter = self._table.get(key)
        if not counter:
            return []
        return sorted(counter.items(), key=lambda kv: (-kv[1], self.tie_key(kv[0])))

    def majority(self, key: K) -> Optional[V]:
        ranked = self.candidates(key)
        return ranked[0][0] if ranked else None

    def sample(self, key: K, rng: np.random.Generator) -> Optional[V]:
        """Uniform draw over the distinct values of ``key``."""
        ranked = sorted(self._table.get(key, {}), key=self.tie_key)
        if not ranked:
            return None
        return ranked[int(rng.integers(len(ranked)))]

    def save_jsonl(
        self,
        path: Union[str, Path],
        encode_key: Callable[[K], Any],
        encode_value: Callable[[V], Any],
    ) -> int:
        records = (
            {"key": encode_key(key), "values": [
                {"value": encode_value(v), "count": c} for v, c in self.candidates(key)
            ]}
            for key in sorted(self._table, key=self.tie_key)
        )
        n = write_jsonl(path, records)
        logger.info(f"Saved {n} table keys to {path}")
        return n

    @classmethod
    def load_jsonl(
        cls,
        path: Union[str, Path],
        decode_key: Callable[[Any], K],
        decode_value: Callable[[Any], V],
        tie_key: Callable[[Any], Any] = repr,
    ) -> "FrequencyTable[K, V]":
        table: "FrequencyTable[K, V]" = cls(tie_key=tie_key)
        for record in iter_jsonl(path):
            key = decode_key(record["key"])
            for item in record["values"]:
                table.add(key, decode_value(item["value"]), int(item["count"]))
        logger.info(f"Loaded {len(table)} table keys from {path}")
        return table

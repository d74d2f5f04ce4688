"""Byte-pair encoding over word tokens with ``@@`` continuation markers.

Learning follows the classic merge procedure with an end-of-word marker:
the most frequent adjacent symbol pair is merged until the merge budget is
spent or the best pair falls below the frequency threshold. Ties go to the
lexicographically smallest pair.
"""

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Set, Tuple, Union

import regex as re
from loguru import logger

END = "</w>"
CONTINUATION = "@@"
PROTECTED = re.compile(r"^(?:<[^>\s]+>|ENTITY-\d+|(?:VP|DT)\[[^\]]*\])$")

Pair = Tuple[str, str]


@dataclass
class BPEModel:
    merges: List[Pair]
    merge_target: int
    threshold: int
    vocabulary: Set[str] = field(default_factory=set)
    _ranks: Dict[Pair, int] = field(init=False, repr=False)
    _cache: Dict[str, Tuple[str, ...]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._ranks = {pair: i for i, pair in enumerate(self.merges)}
        self._cache = {}

    def segment(self, word: str) -> Tuple[str, ...]:
        """Subword units of one word, without markers."""
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        symbols = list(word) + [END]
        while len(symbols) > 1:
            ranked = [
                (self._ranks[pair], i)
                for i, pair in enumerate(zip(symbols, symbols[1:]))
                if pair in self._ranks
            ]
            if not ranked:
                break
            best = self.merges[min(ranked)[0]]
            symbols = _merge_symbols(symbols, best)
        if symbols[-1] == END:
            symbols.pop()
        elif symbols[-1].endswith(END):
            symbols[-1] = symbols[-1][: -len(END)]
        result = tuple(symbols)
        self._cache[word] = result
        return result

    def encode(self, tokens: Sequence[str]) -> List[str]:
        out: List[str] = []
        for tok in tokens:
            if PROTECTED.match(tok):
                out.append(tok)
                continue
            pieces = self.segment(tok)
            out.extend(p + CONTINUATION for p in pieces[:-1])
            out.append(pieces[-1])
        return out

    def decode(self, subwords: Sequence[str]) -> List[str]:
        out: List[str] = []
        buffer = ""
        for piece in subwords:
            if piece.endswith(CONTINUATION) and not PROTECTED.match(piece):
                buffer += piece[: -len(CONTINUATION)]
            else:
                out.append(buffer + piece)
                buffer = ""
        if buffer:
            out.append(buffer)
        return out

    def to_dict(self) -> Dict[str, object]:
        return {
            "merges": [list(p) for p in self.merges],
            "merge_target": self.merge_target,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "BPEModel":
        merges = [tuple(p) for p in data["merges"]]  # type: ignore[union-attr]
        return cls(merges=merges, merge_target=int(data["merge_target"]), threshold=int(data["threshold"]))  # type: ignore[arg-type]


def _merge_symbols(symbols: List[str], pair: Pair) -> List[str]:
    merged: List[str] = []
    i = 0
    while i < len(symbols):
        if i < len(symbols) - 1 and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            merged.append(pair[0] + pair[1])
            i += 2
        else:
            merged.append(symbols[i])
            i += 1
    return merged


def _lines_to_tokens(corpus_lines: Iterable[Union[str, Sequence[str]]]) -> Counter:
    counts: Counter = Counter()
    for line in corpus_lines:
        tokens = line.split() if isinstance(line, str) else line
        counts.update(tok for tok in tokens if not PROTECTED.match(tok))
    return counts


def bpe_train(corpus_lines: Iterable[Union[str, Sequence[str]]], merges: int, threshold: int) -> BPEModel:
    """Learn up to ``merges`` merge operations.

    Args:
        corpus_lines: Whitespace-separated strings or token sequences.
        merges: Merge budget.
        threshold: Pairs seen fewer times than this are never merged.

    Raises:
        ValueError: If ``merges`` is not positive or the corpus has no words.
    """
    if merges <= 0:
        raise ValueError(f"merges must be positive, got {merges}")
    word_counts = _lines_to_tokens(corpus_lines)
    if not word_counts:
        raise ValueError("cannot learn BPE from an empty corpus")

    words: List[List[str]] = []
    freqs: List[int] = []
    stats: Counter = Counter()
    index: Dict[Pair, Set[int]] = defaultdict(set)
    for wi, (word, freq) in enumerate(sorted(word_counts.items())):
        symbols = list(word) + [END]
        words.append(symbols)
        freqs.append(freq)
        for pair in zip(symbols, symbols[1:]):
            stats[pair] += freq
            index[pair].add(wi)

    learned: List[Pair] = []
    while len(learned) < merges and stats:
        best = min(stats, key=lambda p: (-stats[p], p))
        if stats[best] < threshold:
            break
        learned.append(best)
        for wi in sorted(index.pop(best, ())):
            old = words[wi]
            new = _merge_symbols(old, best)
            if new == old:
                continue
            for pair in zip(old, old[1:]):
                stats[pair] -= freqs[wi]
                if stats[pair] <= 0:
                    del stats[pair]
            for pair in zip(new, new[1:]):
                stats[pair] += freqs[wi]
                index[pair].add(wi)
            words[wi] = new
        stats.pop(best, None)

    vocabulary = {sym for symbols in words for sym in symbols}
    logger.info(f"Learned {len(learned)} BPE merges (budget {merges}, threshold {threshold})")
    return BPEModel(merges=learned, merge_target=merges, threshold=threshold, vocabulary=vocabulary)


def bpe_encode(m: BPEModel, tokens: Sequence[str]) -> List[str]:
    return m.encode(tokens)


def bpe_decode(m: BPEModel, subwords: Sequence[str]) -> List[str]:
    return m.decode(subwords)

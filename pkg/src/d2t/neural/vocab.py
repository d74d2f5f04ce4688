import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
SPECIALS = (PAD, UNK, BOS, EOS)


@dataclass
class Vocab:
    """Token/id mapping with ``<pad> <unk> <s> </s>`` at ids 0..3."""

    itos: List[str]
    stoi: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if tuple(self.itos[: len(SPECIALS)]) != SPECIALS:
            raise ValueError(f"vocabulary must start with {SPECIALS}")
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}

    @classmethod
    def build(cls, sequences: Iterable[Sequence[str]], min_freq: int = 1, max_size: Optional[int] = None) -> "Vocab":
        counts: Counter = Counter()
        for seq in sequences:
            counts.update(seq)
        tokens = [t for t, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])) if c >= min_freq and t not in SPECIALS]
        if max_size is not None:
            tokens = tokens[:max_size]
        return cls(list(SPECIALS) + tokens)

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: object) -> bool:
        return token in self.stoi

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    @property
    def bos_id(self) -> int:
        return 2

    @property
    def eos_id(self) -> int:
        return 3

    def encode(self, tokens: Sequence[str], add_bos: bool = False, add_eos: bool = False) -> List[int]:
        ids = [self.stoi.get(tok, self.unk_id) for tok in tokens]
        if add_bos:
            ids = [self.bos_id] + ids
        if add_eos:
            ids = ids + [self.eos_id]
        return ids

    def decode(self, ids: Iterable[int]) -> List[str]:
        """Tokens up to the first ``</s>``, without padding or ``<s>``."""
        out = []
        for i in ids:
            if i == self.eos_id:
                break
            if i in (self.pad_id, self.bos_id):
                continue
            out.append(self.itos[i])
        return out

    def signature(self) -> str:
        return hashlib.sha1("\n".join(self.itos).encode("utf-8")).hexdigest()

    def to_dict(self) -> Dict[str, List[str]]:
        return {"itos": list(self.itos)}

    @classmethod
    def from_dict(cls, data: Dict[str, List[str]]) -> "Vocab":
        return cls(list(data["itos"]))

"""Corpus and run models for d2t using Pydantic V2 patterns."""

from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

MAX_TRIPLES = 7
SPLITS = ("train", "dev", "test")

Partition = Tuple[Tuple[int, ...], ...]


class InvariantError(ValueError):
    """A partition or permutation invariant does not hold."""


def validate_partition(breaks: Sequence[Sequence[int]], n: int) -> Partition:
    """Check that sentence intervals split ``range(n)`` contiguously.

    Args:
        breaks: Index lists, one per sentence.
        n: Number of ordered triples.

    Returns:
        Partition: The intervals as a tuple of tuples.

    Raises:
        InvariantError: If intervals are empty, overlap, leave gaps or go out
            of range.
    """
    expected = 0
    for sentence in breaks:
        if not sentence:
            raise InvariantError(f"empty sentence interval in {list(breaks)}")
        for index in sentence:
            if index != expected:
                raise InvariantError(
                    f"sentence intervals {[list(s) for s in breaks]} are not a "
                    f"contiguous partition of {n} triples"
                )
            expected += 1
    if expected != n:
        raise InvariantError(
            f"sentence intervals cover {expected} of {n} triples"
        )
    return tuple(tuple(s) for s in breaks)


def partition_from_sizes(sizes: Sequence[int]) -> Partition:
    """Build contiguous intervals from sentence lengths."""
    out: List[Tuple[int, ...]] = []
    start = 0
    for size in sizes:
        out.append(tuple(range(start, start + size)))
        start += size
    return tuple(out)


class Triple(BaseModel):
    """One RDF fact. Fields never contain whitespace."""

    model_config = ConfigDict(frozen=True)

    subject: str = Field(..., description="Entity identifier")
    predicate: str = Field(..., description="camelCase relation name")
    object: str = Field(..., description="Entity identifier or quoted literal")

    @field_validator("subject", "predicate", "object")
    @classmethod
    def _no_whitespace(cls, value: str) -> str:
        if not value:
            raise ValueError("triple fields must be non-empty")
        if any(ch.isspace() for ch in value):
            raise ValueError(f"triple field contains whitespace: {value!r}")
        return value

    def tokens(self) -> List[str]:
        return [self.subject, self.predicate, self.object]

    def sort_key(self) -> Tuple[str, str, str]:
        return (self.predicate, self.subject, self.object)


class TripleSet(BaseModel):
    """An unordered input set of 1 to 7 triples."""

    model_config = ConfigDict(frozen=True)

    triples: Tuple[Triple, ...]
    domain: str
    seen: bool = True

    @field_validator("triples")
    @classmethod
    def _bounded(cls, value: Tuple[Triple, ...]) -> Tuple[Triple, ...]:
        if not 1 <= len(value) <= MAX_TRIPLES:
            raise ValueError(
                f"a triple set holds 1..{MAX_TRIPLES} triples, got {len(value)}"
            )
        return value

    @property
    def size(self) -> int:
        return len(self.triples)

    def predicates(self) -> List[str]:
        return [t.predicate for t in self.triples]


class ReferenceInstance(BaseModel):
    """A gold reference with its uncased template contexts."""

    model_config = ConfigDict(frozen=True)

    entity: str
    refex: Tuple[str, ...] = Field(..., description="Cased tokenized reference")
    pre_context: Tuple[str, ...] = ()
    post_context: Tuple[str, ...] = ()
    ref_type: Optional[str] = Field(
        default=None, description="name, pronoun, description or demonstrative"
    )

    @field_validator("refex")
    @classmethod
    def _non_empty(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        if not value:
            raise ValueError("refex must be non-empty")
        return value

    @field_validator("pre_context", "post_context")
    @classmethod
    def _uncased(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        if any(tok != tok.lower() for tok in value):
            raise ValueError("reference contexts must be lowercase")
        return value


class LexEntry(BaseModel):
    """One human verbalization with its gold intermediate layers."""

    model_config = ConfigDict(frozen=True)

    text: str
    ordered_triples: Tuple[Triple, ...]
    sentence_breaks: Partition
    template: Tuple[str, ...] = Field(
        ..., description="Cased template tokens with ENTITY-n, VP[...] and DT[...]"
    )
    references: Tuple[ReferenceInstance, ...] = ()

    @model_validator(mode="after")
    def _breaks_cover_order(self) -> "LexEntry":
        validate_partition(self.sentence_breaks, len(self.ordered_triples))
        return self

    def ordered_predicates(self) -> List[str]:
        return [t.predicate for t in self.ordered_triples]


class CorpusEntry(BaseModel):
    """A triple set with its split label and verbalizations."""

    model_config = ConfigDict(frozen=True)

    eid: str
    split: str
    tripleset: TripleSet
    lexes: Tuple[LexEntry, ...]

    @field_validator("split")
    @classmethod
    def _known_split(cls, value: str) -> str:
        if value not in SPLITS:
            raise ValueError(f"unknown split {value!r}")
        return value

    @model_validator(mode="after")
    def _lexes_are_permutations(self) -> "CorpusEntry":
        if not self.lexes:
            raise ValueError(f"entry {self.eid} has no verbalizations")
        source = sorted(t.sort_key() for t in self.tripleset.triples)
        for lex in self.lexes:
            if sorted(t.sort_key() for t in lex.ordered_triples) != source:
                raise InvariantError(
                    f"entry {self.eid}: ordered triples are not a permutation "
                    "of the triple set"
                )
        return self

    @property
    def domain(self) -> str:
        return self.tripleset.domain

    @property
    def seen(self) -> bool:
        return self.tripleset.seen


class Corpus(BaseModel):
    """All entries of a corpus release."""

    model_config = ConfigDict(frozen=True)

    entries: Tuple[CorpusEntry, ...]
    version: str = "webnlg-1.5"

    def split(self, name: str) -> List[CorpusEntry]:
        return [e for e in self.entries if e.split == name]

    def domains(self, split: Optional[str] = None) -> List[str]:
        entries = self.entries if split is None else self.split(split)
        return sorted({e.domain for e in entries})

    def by_eid(self) -> Dict[Tuple[str, str], CorpusEntry]:
        return {(e.split, e.eid): e for e in self.entries}


class DatasetInstance(BaseModel):
    """A source with its distinct gold targets and their frequencies."""

    model_config = ConfigDict(frozen=True)

    eid: str
    source: Tuple[str, ...]
    targets: Tuple[Tuple[str, ...], ...]
    counts: Tuple[int, ...]
    domain: str
    seen: bool
    size: int
    reference: Optional[ReferenceInstance] = None

    @model_validator(mode="after")
    def _targets_distinct(self) -> "DatasetInstance":
        if not self.targets:
            raise ValueError("a dataset instance needs at least one target")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("dataset targets must be distinct")
        if len(self.counts) != len(self.targets) or min(self.counts) < 1:
            raise ValueError("every target needs a positive count")
        return self

    @property
    def meta(self) -> Tuple[str, bool, int]:
        return (self.domain, self.seen, self.size)

    def expanded_targets(self) -> List[Tuple[str, ...]]:
        """One target per verbalization, as used for training."""
        out: List[Tuple[str, ...]] = []
        for target, count in zip(self.targets, self.counts):
            out.extend([target] * count)
        return out


class TaskDataset(BaseModel):
    """The instances of one task on one split."""

    model_config = ConfigDict(frozen=True)

    task: str
    split: str
    instances: Tuple[DatasetInstance, ...] = ()

    @property
    def n_sources(self) -> int:
        return len(self.instances)

    @property
    def n_targets(self) -> int:
        return sum(len(i.targets) for i in self.instances)

    @property
    def n_verbalizations(self) -> int:
        return sum(sum(i.counts) for i in self.instances)

    def pairs(self) -> List[Tuple[Tuple[str, ...], Tuple[str, ...]]]:
        """(source, target) training pairs, one per verbalization."""
        return [(i.source, t) for i in self.instances for t in i.expanded_targets()]


class RunManifest(BaseModel):
    """Everything needed to rerun a CLI command."""

    model_config = ConfigDict(frozen=True)

    command: str
    config: Dict[str, Any] = Field(default_factory=dict)
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)
    seed: int
    corpus_version: Optional[str] = None
    started_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    finished_at: Optional[datetime] = None

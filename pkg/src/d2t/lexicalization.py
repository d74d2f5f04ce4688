"""Lexicalization: choose a delexicalized template for structured triples.

A template mixes plain words with ``ENTITY-n`` slots and ``VP[...]``/``DT[...]``
tags. Slots number entities by first occurrence over the (subject, object)
pairs of the ordered triples.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple, Union

import numpy as np
import regex as re
from loguru import logger

from d2t.corpus import (
    ENTITY_RE,
    delinearize_structured,
    distinct_entities,
    entity_ranks,
    linearize_structured,
    structure_key,
)
from d2t.utils.frequency import FrequencyTable
from d2t.utils.models import Partition, TaskDataset, Triple
from d2t.utils.text_utils import camel_case_words

if TYPE_CHECKING:
    from d2t.neural.engine import Translator

VP_ATTRS = ("aspect", "tense", "voice", "person", "number")
_BRACKET = re.compile(r"^([A-Za-z]+)\[(.*)\]$")
_BRACKET_SPACES = re.compile(r"\[([^\]]*)\]")

Structure = Sequence[Sequence[Triple]]
StructKey = Tuple[Tuple[str, ...], ...]


class TemplateParseError(ValueError):
    """A template token is malformed."""

    def __init__(self, position: int, token: str, message: str) -> None:
        self.position = position
        self.token = token
        super().__init__(f"token {position} ({token!r}): {message}")


class BindingError(IndexError):
    """An entity slot has no entity to bind to."""


@dataclass(frozen=True)
class Word:
    text: str

    def serialize(self) -> str:
        return self.text


@dataclass(frozen=True)
class EntityTag:
    index: int

    def serialize(self) -> str:
        return f"ENTITY-{self.index}"


@dataclass(frozen=True)
class VPTag:
    aspect: Optional[str] = None
    tense: Optional[str] = None
    voice: Optional[str] = None
    person: Optional[str] = None
    number: Optional[str] = None

    def attributes(self) -> Tuple[Optional[str], ...]:
        return tuple(getattr(self, name) for name in VP_ATTRS)

    def serialize(self) -> str:
        values = ",".join(f"{name}={getattr(self, name) or 'null'}" for name in VP_ATTRS)
        return f"VP[{values}]"


@dataclass(frozen=True)
class DTTag:
    form: str

    def serialize(self) -> str:
        return f"DT[form={self.form}]"


@dataclass(frozen=True)
class BoundEntity:
    """An entity slot bound to its identifier."""

    entity: str
    index: int

    def serialize(self) -> str:
        return self.entity


TemplateToken = Union[Word, EntityTag, VPTag, DTTag]
BoundToken = Union[Word, BoundEntity, VPTag, DTTag]


@dataclass(frozen=True)
class Template:
    tokens: Tuple[TemplateToken, ...] = ()

    def serialize(self) -> List[str]:
        return [tok.serialize() for tok in self.tokens]

    def __str__(self) -> str:
        return " ".join(self.serialize())

    def __len__(self) -> int:
        return len(self.tokens)

    def __add__(self, other: "Template") -> "Template":
        return Template(self.tokens + other.tokens)

    def entity_indices(self) -> List[int]:
        return [tok.index for tok in self.tokens if isinstance(tok, EntityTag)]

    def uncased(self) -> "Template":
        return Template(
            tuple(Word(t.text.lower()) if isinstance(t, Word) else t for t in self.tokens)
        )

    def renumber(self, mapping: "dict[int, int]") -> "Template":
        return Template(
            tuple(EntityTag(mapping[t.index]) if isinstance(t, EntityTag) else t for t in self.tokens)
        )


@dataclass(frozen=True)
class BoundTemplate:
    tokens: Tuple[BoundToken, ...] = ()

    def entities(self) -> List[str]:
        return [tok.entity for tok in self.tokens if isinstance(tok, BoundEntity)]

    def serialize(self) -> List[str]:
        """Tokens with each slot shown as ``ENTITY-n``."""
        return [
            f"ENTITY-{tok.index}" if isinstance(tok, BoundEntity) else tok.serialize()
            for tok in self.tokens
        ]


def _parse_attributes(position: int, token: str, body: str) -> dict:
    attrs = {}
    for item in body.split(","):
        name, sep, value = item.partition("=")
        if not sep or not name or not value:
            raise TemplateParseError(position, token, f"malformed attribute {item!r}")
        if name in attrs:
            raise TemplateParseError(position, token, f"repeated attribute {name!r}")
        attrs[name] = None if value == "null" else value
    return attrs


def parse_token(token: str, position: int = 0) -> TemplateToken:
    match = ENTITY_RE.match(token)
    if match:
        index = int(match.group(1))
        if index < 1:
            raise TemplateParseError(position, token, "entity indices start at 1")
        return EntityTag(index)
    if "[" not in token and "]" not in token:
        return Word(token)
    match = _BRACKET.match(token)
    if not match:
        raise TemplateParseError(position, token, "unbalanced brackets")
    kind, body = match.groups()
    if kind == "VP":
        attrs = _parse_attributes(position, token, body)
        unknown = set(attrs) - set(VP_ATTRS)
        if unknown:
            raise TemplateParseError(position, token, f"unknown VP attributes {sorted(unknown)}")
        return VPTag(**attrs)
    if kind == "DT":
        attrs = _parse_attributes(position, token, body)
        if set(attrs) != {"form"} or attrs["form"] is None:
            raise TemplateParseError(position, token, "DT takes exactly one form attribute")
        return DTTag(attrs["form"])
    raise TemplateParseError(position, token, f"unknown tag {kind!r}")


def template_parse(tokens: Sequence[str]) -> Template:
    """Parse template tokens.

    Raises:
        TemplateParseError: On malformed or unknown bracketed tags.
    """
    return Template(tuple(parse_token(tok, i) for i, tok in enumerate(tokens)))


def normalize_template_string(text: str) -> List[str]:
    """Split a template line, removing whitespace inside brackets first."""
    return _BRACKET_SPACES.sub(lambda m: "[" + "".join(m.group(1).split()) + "]", text).split()


def template_from_string(text: str) -> Template:
    return template_parse(normalize_template_string(text))


# ---------------------------------------------------------------------------
# Template store
# ---------------------------------------------------------------------------


def _key_to_json(key: StructKey) -> list:
    return [list(sentence) for sentence in key]


def _template_tie(template: Template) -> str:
    return str(template)


@dataclass
class TemplateStore:
    """Counted templates per sentence-partitioned predicate key."""

    table: FrequencyTable = field(default_factory=lambda: FrequencyTable(tie_key=_template_tie))
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.table)

    def __contains__(self, key: object) -> bool:
        return key in self.table

    def candidates(self, key: StructKey) -> List[Tuple[Template, int]]:
        return self.table.candidates(key)

    def save(self, path: Union[str, Path]) -> int:
        return self.table.save_jsonl(path, _key_to_json, lambda t: str(t))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TemplateStore":
        table = FrequencyTable.load_jsonl(
            path,
            lambda k: tuple(tuple(s) for s in k),
            template_from_string,
            tie_key=_template_tie,
        )
        return cls(table=table)


def split_sentences(template: Template) -> List[Template]:
    """Cut a template after each full stop."""
    out: List[Template] = []
    current: List[TemplateToken] = []
    for tok in template.tokens:
        current.append(tok)
        if isinstance(tok, Word) and tok.text == ".":
            out.append(Template(tuple(current)))
            current = []
    if current:
        out.append(Template(tuple(current)))
    return out


def _add_windows(store: TemplateStore, template: Template, ordered: Sequence[Triple], breaks: Partition, count: int) -> None:
    segments = split_sentences(template)
    if len(segments) != len(breaks) or len(breaks) < 2:
        return
    global_entities = distinct_entities(ordered)
    for start in range(len(breaks)):
        for end in range(start + 1, len(breaks) + 1):
            if end - start == len(breaks):
                continue
            window = [ordered[i] for s in breaks[start:end] for i in s]
            local = entity_ranks(window)
            piece = Template(tuple(tok for seg in segments[start:end] for tok in seg.tokens))
            mapping = {}
            for index in piece.entity_indices():
                entity = global_entities[index - 1]
                if entity not in local:
                    break
                mapping[index] = local[entity]
            else:
                key = tuple(tuple(ordered[i].predicate for i in s) for s in breaks[start:end])
                store.table.add(key, piece.renumber(mapping), count)


def template_store_train(ds: TaskDataset, sentence_windows: bool = False) -> TemplateStore:
    """Count gold templates per structured key.

    Args:
        ds: A lexicalization dataset.
        sentence_windows: Also store the template of every contiguous run of
            sentences, renumbered to that run.

    Returns:
        TemplateStore: Unparseable or out-of-range templates are skipped and
            counted in ``skipped``.
    """
    store = TemplateStore()
    for instance in ds.instances:
        ordered, breaks = delinearize_structured(instance.source)
        key = structure_key([t.predicate for t in ordered], breaks)
        n_entities = len(distinct_entities(ordered))
        for target, count in zip(instance.targets, instance.counts):
            try:
                template = template_parse(target)
            except TemplateParseError as e:
                store.skipped += 1
                logger.warning(f"Skipping gold template of {instance.eid}: {e}")
                continue
            if any(i > n_entities for i in template.entity_indices()):
                store.skipped += 1
                logger.warning(f"Skipping gold template of {instance.eid}: entity index out of range")
                continue
            store.table.add(key, template, count)
            if sentence_windows:
                _add_windows(store, template, ordered, breaks, count)
    logger.info(f"Template store: {len(store)} keys, {store.skipped} templates skipped")
    return store


# ---------------------------------------------------------------------------
# Lookup
# ---------------------------------------------------------------------------


def fallback_template(sentence: Sequence[Triple], ranks: dict) -> Template:
    """``ENTITY-i <predicate words> ENTITY-j .`` for each triple."""
    tokens: List[TemplateToken] = []
    for t in sentence:
        tokens.append(EntityTag(ranks[t.subject]))
        tokens.extend(Word(w) for w in camel_case_words(t.predicate))
        tokens.append(EntityTag(ranks[t.object]))
        tokens.append(Word("."))
    return Template(tuple(tokens))


def _choose(
    store: TemplateStore, window: Structure, ranks: dict, mode: str, rng: np.random.Generator
) -> Optional[Template]:
    key = tuple(tuple(t.predicate for t in s) for s in window)
    ranked = store.candidates(key)
    if not ranked:
        return None
    local_entities = distinct_entities([t for s in window for t in s])
    compatible = [
        (template, count)
        for template, count in ranked
        if all(i <= len(local_entities) for i in template.entity_indices())
    ]
    if not compatible:
        return None
    if mode == "majority":
        template = compatible[0][0]
    else:
        template = sorted((t for t, _ in compatible), key=_template_tie)[int(rng.integers(len(compatible)))]
    mapping = {k: ranks[local_entities[k - 1]] for k in set(template.entity_indices())}
    return template.renumber(mapping)


def lookup_with_fallbacks(
    struct: Structure, store: TemplateStore, mode: str = "majority", seed: int = 0
) -> Tuple[Template, List[int]]:
    """Greedy longest-window template lookup with a clause fallback per sentence.

    Returns:
        Tuple[Template, List[int]]: The template and the indices of sentences
            that got the fallback clause.
    """
    if not struct:
        raise ValueError("cannot lexicalize an empty structure")
    if mode not in ("majority", "random"):
        raise ValueError(f"unknown lookup mode {mode!r}")
    rng = np.random.default_rng(seed)
    ranks = entity_ranks([t for s in struct for t in s])
    n = len(struct)
    start, end = 0, n
    template = Template()
    fallbacks: List[int] = []
    while start < n:
        if start == end:
            template = template + fallback_template(struct[start], ranks)
            fallbacks.append(start)
            start, end = start + 1, n
            continue
        found = _choose(store, struct[start:end], ranks, mode, rng)
        if found is not None:
            template = template + found
            start, end = end, n
        else:
            end -= 1
    return template, fallbacks


def lexicalize_lookup(struct: Structure, store: TemplateStore, mode: str = "majority", seed: int = 0) -> Template:
    template, _ = lookup_with_fallbacks(struct, store, mode, seed)
    return template


def covers_entities(template: Template, struct: Structure) -> bool:
    """True if slots are exactly 1..E for the E distinct entities of ``struct``."""
    n_entities = len(distinct_entities([t for s in struct for t in s]))
    return set(template.entity_indices()) == set(range(1, n_entities + 1))


def lexicalize_neural(
    m: "Translator", struct: Structure, store: TemplateStore, seed: int = 0
) -> Tuple[Template, bool]:
    """Decode a template; fall back to the majority lookup when it is unusable.

    Returns:
        Tuple[Template, bool]: The template and whether the fallback fired.
    """
    ordered = [t for s in struct for t in s]
    sizes = [len(s) for s in struct]
    breaks = []
    start = 0
    for size in sizes:
        breaks.append(list(range(start, start + size)))
        start += size
    decoded = m.translate(linearize_structured(ordered, breaks))
    try:
        template = template_parse(decoded)
    except TemplateParseError as e:
        logger.warning(f"Neural template does not parse ({e}); using majority lookup")
        return lexicalize_lookup(struct, store, "majority", seed), True
    if not covers_entities(template, struct):
        logger.warning(
            f"Neural template slots {sorted(set(template.entity_indices()))} do not cover "
            f"the input entities; using majority lookup"
        )
        return lexicalize_lookup(struct, store, "majority", seed), True
    return template, False


def bind_entities(t: Template, ordered: Sequence[Triple]) -> BoundTemplate:
    """Replace ``ENTITY-k`` with the k-th distinct entity of ``ordered``.

    Raises:
        BindingError: If a slot index exceeds the number of distinct entities.
    """
    entities = distinct_entities(ordered)
    tokens: List[BoundToken] = []
    for tok in t.tokens:
        if isinstance(tok, EntityTag):
            if tok.index > len(entities):
                raise BindingError(f"ENTITY-{tok.index} on a set with {len(entities)} entities")
            tokens.append(BoundEntity(entities[tok.index - 1], tok.index))
        else:
            tokens.append(tok)
    return BoundTemplate(tuple(tokens))


def structure_of(ordered: Sequence[Triple], breaks: Partition) -> List[List[Triple]]:
    return [[ordered[i] for i in sentence] for sentence in breaks]

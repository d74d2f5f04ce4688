"""Load the augmented WebNLG corpus and extract per-stage datasets.

The XML release is converted once into line-delimited interchange records::

    {eid, domain, split, seen, size, triples,
     lexes: [{text, order, breaks, template, references}]}

Every other module reads the typed models built from those records.
"""

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union
from xml.parsers.expat import ExpatError

import regex as re
import xmltodict
from loguru import logger
from pydantic import ValidationError

from d2t.utils.file_utils import collect_files, iter_jsonl, read_file, write_jsonl
from d2t.utils.json_utils import JsonLineError
from d2t.utils.models import (
    SPLITS,
    Corpus,
    CorpusEntry,
    DatasetInstance,
    LexEntry,
    Partition,
    ReferenceInstance,
    TaskDataset,
    Triple,
    TripleSet,
    validate_partition,
)
from d2t.utils.text_utils import lower_tokens, tokenize

TRIPLE_OPEN, TRIPLE_CLOSE = "<TRIPLE>", "</TRIPLE>"
SNT_OPEN, SNT_CLOSE = "<SNT>", "</SNT>"

ENTITY_RE = re.compile(r"^ENTITY-(\d+)$")
TAG_RE = re.compile(r"^(?:ENTITY-\d+|(?:VP|DT)\[[^\]\s]*\])$")
_RAW_TAG = re.compile(r"(?:VP|DT)\[[^\]]*\]|(?:AGENT|PATIENT|BRIDGE|ENTITY)-\d+")
_CORPUS_TAG = re.compile(r"^(?:AGENT|PATIENT|BRIDGE)-\d+$")

TASKS = ("ordering", "structuring", "lexicalization", "reg", "e2e")
TASK_ALIASES = {"lex": "lexicalization"}

SEEN_DOMAINS = (
    "Airport", "Astronaut", "Building", "City", "ComicsCharacter",
    "Food", "Monument", "SportsTeam", "University", "WrittenWork",
)
UNSEEN_DOMAINS = ("Artist", "Athlete", "CelestialBody", "MeanOfTransportation", "Politician")
KNOWN_DOMAINS = SEEN_DOMAINS + UNSEEN_DOMAINS

# Extraction counts of the full release (targets per split, then source sets per split).
PUBLISHED_SIZES: Dict[str, Dict[str, Tuple[int, int, int]]] = {
    "ordering": {"targets": (13757, 1730, 3839), "sources": (5152, 644, 1408)},
    "structuring": {"targets": (14010, 1752, 3955), "sources": (10281, 1278, 2774)},
    "lexicalization": {"targets": (18295, 2288, 5012), "sources": (12814, 1601, 3463)},
    "reg": {"targets": (67144, 8294, 19210)},
}


class CorpusParseError(ValueError):
    """A corpus file cannot be parsed."""

    def __init__(self, file_name: str, line: Optional[int], message: str) -> None:
        self.file_name = file_name
        self.line = line
        where = f"{file_name}:{line}" if line is not None else file_name
        super().__init__(f"{where}: {message}")


@dataclass
class ImportStats:
    """What an import read and what it had to skip."""

    files: int = 0
    entries: int = 0
    lexes: int = 0
    skipped: Counter = field(default_factory=Counter)

    def skip(self, reason: str, what: str) -> None:
        self.skipped[reason] += 1
        logger.debug(f"Skipping {what}: {reason}")


# ---------------------------------------------------------------------------
# Linearization
# ---------------------------------------------------------------------------


def canonical_order(triples: Iterable[Triple]) -> List[Triple]:
    """Sort by (predicate, subject, object) on raw code points."""
    return sorted(triples, key=Triple.sort_key)


def canonical_linearize(ts: Union[TripleSet, Sequence[Triple]]) -> List[str]:
    triples = ts.triples if isinstance(ts, TripleSet) else ts
    if not triples:
        raise ValueError("cannot linearize an empty triple set")
    return linearize_ordered(canonical_order(triples))


def linearize_ordered(triples: Sequence[Triple]) -> List[str]:
    """Render triples in the given order as ``<TRIPLE> s p o </TRIPLE>``."""
    if not triples:
        raise ValueError("cannot linearize an empty triple list")
    out: List[str] = []
    for t in triples:
        out.extend([TRIPLE_OPEN, t.subject, t.predicate, t.object, TRIPLE_CLOSE])
    return out


def linearize_structured(ordered: Sequence[Triple], breaks: Sequence[Sequence[int]]) -> List[str]:
    """Wrap each sentence of ``ordered`` in ``<SNT> ... </SNT>``.

    Raises:
        InvariantError: If ``breaks`` is not a contiguous partition.
    """
    partition = validate_partition(breaks, len(ordered))
    out: List[str] = []
    for sentence in partition:
        out.append(SNT_OPEN)
        out.extend(linearize_ordered([ordered[i] for i in sentence]))
        out.append(SNT_CLOSE)
    return out


def delinearize_triples(tokens: Sequence[str]) -> List[Triple]:
    """Inverse of :func:`linearize_ordered`.

    Raises:
        ValueError: On anything but a run of ``<TRIPLE> s p o </TRIPLE>`` groups.
    """
    if len(tokens) % 5:
        raise ValueError(f"malformed triple linearization of {len(tokens)} tokens")
    triples = []
    for i in range(0, len(tokens), 5):
        group = tokens[i : i + 5]
        if group[0] != TRIPLE_OPEN or group[4] != TRIPLE_CLOSE:
            raise ValueError(f"malformed triple group at token {i}: {group}")
        triples.append(Triple(subject=group[1], predicate=group[2], object=group[3]))
    return triples


def delinearize_structured(tokens: Sequence[str]) -> Tuple[List[Triple], Partition]:
    """Inverse of :func:`linearize_structured`."""
    ordered: List[Triple] = []
    sizes: List[int] = []
    i = 0
    while i < len(tokens):
        if tokens[i] != SNT_OPEN:
            raise ValueError(f"expected {SNT_OPEN} at token {i}")
        try:
            end = list(tokens).index(SNT_CLOSE, i)
        except ValueError as e:
            raise ValueError(f"unclosed {SNT_OPEN} at token {i}") from e
        sentence = delinearize_triples(tokens[i + 1 : end])
        if not sentence:
            raise ValueError(f"empty sentence at token {i}")
        ordered.extend(sentence)
        sizes.append(len(sentence))
        i = end + 1
    start = 0
    breaks = []
    for size in sizes:
        breaks.append(tuple(range(start, start + size)))
        start += size
    return ordered, tuple(breaks)


def structure_tokens(predicates: Sequence[str], breaks: Sequence[Sequence[int]]) -> List[str]:
    """``<SNT> p p </SNT> <SNT> p </SNT>`` for a predicate sequence."""
    partition = validate_partition(breaks, len(predicates))
    out: List[str] = []
    for sentence in partition:
        out.append(SNT_OPEN)
        out.extend(predicates[i] for i in sentence)
        out.append(SNT_CLOSE)
    return out


def structure_key(predicates: Sequence[str], breaks: Sequence[Sequence[int]]) -> Tuple[Tuple[str, ...], ...]:
    """Sentence-partitioned predicate key used by the template store."""
    return tuple(tuple(predicates[i] for i in sentence) for sentence in breaks)


def entity_ranks(ordered: Sequence[Triple]) -> Dict[str, int]:
    """1-based first-occurrence rank of each entity over (subject, object) pairs."""
    ranks: Dict[str, int] = {}
    for t in ordered:
        for entity in (t.subject, t.object):
            if entity not in ranks:
                ranks[entity] = len(ranks) + 1
    return ranks


def distinct_entities(ordered: Sequence[Triple]) -> List[str]:
    return list(entity_ranks(ordered))


# ---------------------------------------------------------------------------
# Templates and references
# ---------------------------------------------------------------------------


def template_tokens(text: str) -> List[str]:
    """Tokenize a delexicalized template, keeping tags as single tokens.

    Whitespace inside ``VP[...]``/``DT[...]`` brackets is removed first.
    """
    out: List[str] = []
    pos = 0
    for match in _RAW_TAG.finditer(text):
        out.extend(tokenize(text[pos : match.start()]))
        out.append("".join(match.group(0).split()))
        pos = match.end()
    out.extend(tokenize(text[pos:]))
    return out


def uncased_template(tokens: Sequence[str]) -> Tuple[str, ...]:
    """Lowercase the words of a template, leaving tags as they are."""
    return tuple(tok if TAG_RE.match(tok) else tok.lower() for tok in tokens)


def slot_entities(template: Sequence[str], ordered: Sequence[Triple]) -> List[str]:
    """Entity identifier of each ENTITY slot, in template order.

    Raises:
        IndexError: If a slot index exceeds the number of distinct entities.
    """
    entities = distinct_entities(ordered)
    out = []
    for tok in template:
        match = ENTITY_RE.match(tok)
        if match:
            index = int(match.group(1))
            if not 1 <= index <= len(entities):
                raise IndexError(f"ENTITY-{index} out of range for {len(entities)} entities")
            out.append(entities[index - 1])
    return out


def reference_contexts(
    template: Sequence[str],
    entities: Sequence[str],
    realized: Sequence[Sequence[str]],
    slot: int,
) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
    """Uncased pre- and post-context of one entity slot.

    Slots before ``slot`` show their realized reference, slots after it show
    their entity identifier. VP and DT tags stay in place.

    Args:
        template: Template tokens with ENTITY-n slots.
        entities: Entity identifier of each slot.
        realized: Reference tokens of the slots before ``slot``.
        slot: 0-based occurrence index of the slot.
    """
    pre: List[str] = []
    post: List[str] = []
    k = 0
    for tok in template:
        target = pre if k <= slot else post
        if ENTITY_RE.match(tok):
            if k < slot:
                pre.extend(realized[k])
            elif k > slot:
                post.append(entities[k])
            k += 1
        else:
            target.append(tok)
    return lower_tokens(pre), lower_tokens(post)


def seen_entities(corpus: Corpus, split: str = "train") -> Set[str]:
    """Entities that are reference targets in ``split``."""
    return {
        ref.entity
        for entry in corpus.split(split)
        for lex in entry.lexes
        for ref in lex.references
    }


# ---------------------------------------------------------------------------
# XML import
# ---------------------------------------------------------------------------


def _norm(value: Optional[str]) -> str:
    return "_".join((value or "").split())


def _as_list(value: Any) -> List[Any]:
    if value is None:
        return []
    return value if isinstance(value, list) else [value]


def _text(node: Any) -> str:
    if isinstance(node, dict):
        return node.get("#text") or ""
    return node or ""


def _parse_triple(raw: str) -> Optional[Triple]:
    parts = [p.strip() for p in raw.split("|")]
    if len(parts) != 3 or not all(parts):
        return None
    try:
        return Triple(subject=_norm(parts[0]), predicate=_norm(parts[1]), object=_norm(parts[2]))
    except ValidationError:
        return None


def _split_of(file_path: Path, root: Path) -> str:
    for part in file_path.relative_to(root).parts[:-1]:
        if part in SPLITS:
            return part
    if root.name in SPLITS:
        return root.name
    raise CorpusParseError(str(file_path), None, "cannot infer train/dev/test split from path")


def _convert_lex(
    lex: Dict[str, Any], triples: Sequence[Triple], entity_map: Mapping[str, str], stats: ImportStats, what: str
) -> Optional[LexEntry]:
    if lex.get("@comment", "good") != "good":
        stats.skip("bad_comment", what)
        return None
    if not lex.get("sortedtripleset") or not lex.get("lexicalization") or lex.get("references") is None:
        stats.skip("missing_layer", what)
        return None

    ordered: List[Triple] = []
    sizes: List[int] = []
    for sentence in _as_list(lex["sortedtripleset"].get("sentence")):
        if not isinstance(sentence, dict):
            continue
        parsed = [_parse_triple(_text(s)) for s in _as_list(sentence.get("striple"))]
        if not parsed:
            continue
        if any(t is None for t in parsed):
            stats.skip("bad_triple", what)
            return None
        ordered.extend(t for t in parsed if t is not None)
        sizes.append(len(parsed))
    if not ordered or Counter(ordered) != Counter(triples):
        stats.skip("order_mismatch", what)
        return None

    ranks = entity_ranks(ordered)
    raw_template = template_tokens(_text(lex["lexicalization"]))
    template: List[str] = []
    slot_tags: List[str] = []
    for tok in raw_template:
        if _CORPUS_TAG.match(tok) or ENTITY_RE.match(tok):
            entity = entity_map.get(tok)
            if entity is None or entity not in ranks:
                stats.skip("unmapped_tag", what)
                return None
            template.append(f"ENTITY-{ranks[entity]}")
            slot_tags.append(tok)
        else:
            template.append(tok)

    refs = sorted(
        _as_list(lex["references"].get("reference") if isinstance(lex["references"], dict) else None),
        key=lambda r: int(r.get("@number", 0)),
    )
    if len(refs) != len(slot_tags) or any(
        r.get("@tag") not in (None, tag) for r, tag in zip(refs, slot_tags)
    ):
        stats.skip("reference_mismatch", what)
        return None

    entities = [entity_map[tag] for tag in slot_tags]
    refexes = [tokenize(_text(r)) for r in refs]
    if any(not refex for refex in refexes):
        stats.skip("empty_refex", what)
        return None

    references = []
    for slot, (entity, refex, ref) in enumerate(zip(entities, refexes, refs)):
        pre, post = reference_contexts(template, entities, refexes, slot)
        references.append(
            ReferenceInstance(
                entity=entity,
                refex=tuple(refex),
                pre_context=pre,
                post_context=post,
                ref_type=ref.get("@type"),
            )
        )

    start = 0
    breaks = []
    for size in sizes:
        breaks.append(tuple(range(start, start + size)))
        start += size
    return LexEntry(
        text=" ".join(_text(lex.get("text")).split()),
        ordered_triples=tuple(ordered),
        sentence_breaks=tuple(breaks),
        template=tuple(template),
        references=tuple(references),
    )


_FORCE_LIST = ("entry", "mtriple", "lex", "sentence", "striple", "reference", "entity")


def _read_xml(file_path: Path, split: str, stats: ImportStats) -> List[Tuple[str, str, TripleSet, List[LexEntry]]]:
    try:
        doc = xmltodict.parse(read_file(file_path), force_list=_FORCE_LIST)
    except ExpatError as e:
        raise CorpusParseError(str(file_path), e.lineno, str(e)) from e

    entries_node = (doc.get("benchmark") or {}).get("entries") or {}
    out = []
    for entry in _as_list(entries_node.get("entry")):
        eid = f"{file_path.stem}/{entry.get('@eid', '?')}"
        mset = entry.get("modifiedtripleset") or {}
        triples = [_parse_triple(_text(m)) for m in _as_list(mset.get("mtriple"))]
        if not triples or any(t is None for t in triples):
            stats.skip("malformed_entry", eid)
            continue
        entity_map: Dict[str, str] = {}
        for item in _as_list((entry.get("entitymap") or {}).get("entity")):
            tag, _, entity = _text(item).partition("|")
            entity_map[tag.strip()] = _norm(entity)
        try:
            tripleset = TripleSet(
                triples=tuple(t for t in triples if t is not None),
                domain=entry.get("@category", "unknown"),
            )
        except ValidationError:
            stats.skip("malformed_entry", eid)
            continue
        lexes = []
        for lex in _as_list(entry.get("lex")):
            converted = _convert_lex(
                lex, tripleset.triples, entity_map, stats, f"{eid} lex {lex.get('@lid', '?')}"
            )
            if converted is not None:
                lexes.append(converted)
        if not lexes:
            stats.skip("no_lexes", eid)
            continue
        out.append((eid, split, tripleset, lexes))
    return out


def load_webnlg(path: Union[str, Path], format: str = "xml") -> Tuple[Corpus, ImportStats]:
    """Import a corpus directory and report what was skipped.

    Args:
        path: Directory with train/dev/test subdirectories (XML), or a
            directory or file of interchange records (jsonl).
        format: ``xml`` or ``jsonl``.

    Returns:
        Tuple[Corpus, ImportStats]: The corpus and import counters.

    Raises:
        CorpusParseError: On malformed files, naming file and line.
        FileNotFoundError: If ``path`` does not exist.
        ValueError: On an unknown format or a directory without corpus files.
    """
    root = Path(path)
    if format == "jsonl":
        files = [root] if root.is_file() else collect_files(root, ".jsonl")
        if not files:
            raise ValueError("no corpus files found")
        stats = ImportStats(files=len(files))
        entries: List[CorpusEntry] = []
        for file_path in files:
            entries.extend(_read_records(file_path))
        stats.entries = len(entries)
        stats.lexes = sum(len(e.lexes) for e in entries)
        return Corpus(entries=tuple(entries)), stats
    if format != "xml":
        raise ValueError(f"unknown corpus format {format!r}, expected xml or jsonl")

    files = collect_files(root, ".xml")
    if not files:
        raise ValueError("no corpus files found")
    stats = ImportStats(files=len(files))
    raw = []
    for file_path in files:
        raw.extend(_read_xml(file_path, _split_of(file_path, root), stats))
        logger.debug(f"Read {file_path}")

    train_domains = {tripleset.domain for _, split, tripleset, _ in raw if split == "train"}
    seen_ids: Set[Tuple[str, str]] = set()
    entries = []
    for eid, split, tripleset, lexes in raw:
        if (split, eid) in seen_ids:
            raise CorpusParseError(eid, None, f"duplicate entry id in split {split}")
        seen_ids.add((split, eid))
        entries.append(
            CorpusEntry(
                eid=eid,
                split=split,
                tripleset=tripleset.model_copy(update={"seen": tripleset.domain in train_domains}),
                lexes=tuple(lexes),
            )
        )
    stats.entries = len(entries)
    stats.lexes = sum(len(e.lexes) for e in entries)
    unseen = sorted({e.domain for e in entries if not e.seen})
    logger.info(
        f"Imported {stats.entries} entries / {stats.lexes} texts from {stats.files} files; "
        f"unseen domains: {unseen}; skipped: {dict(stats.skipped)}"
    )
    return Corpus(entries=tuple(entries)), stats


def import_webnlg(path: Union[str, Path], format: str = "xml") -> Corpus:
    """Import a corpus directory, see :func:`load_webnlg`."""
    corpus, _ = load_webnlg(path, format)
    return corpus


# ---------------------------------------------------------------------------
# Interchange records
# ---------------------------------------------------------------------------


def entry_to_record(entry: CorpusEntry) -> Dict[str, Any]:
    return {
        "eid": entry.eid,
        "domain": entry.domain,
        "split": entry.split,
        "seen": entry.seen,
        "size": entry.tripleset.size,
        "triples": [t.tokens() for t in entry.tripleset.triples],
        "lexes": [
            {
                "text": lex.text,
                "order": [t.tokens() for t in lex.ordered_triples],
                "breaks": [list(s) for s in lex.sentence_breaks],
                "template": list(lex.template),
                "references": [
                    {
                        "entity": ref.entity,
                        "refex": list(ref.refex),
                        "pre_context": list(ref.pre_context),
                        "post_context": list(ref.post_context),
                        "type": ref.ref_type,
                    }
                    for ref in lex.references
                ],
            }
            for lex in entry.lexes
        ],
    }


def _triple(raw: Sequence[str]) -> Triple:
    s, p, o = raw
    return Triple(subject=s, predicate=p, object=o)


def record_to_entry(record: Mapping[str, Any]) -> CorpusEntry:
    return CorpusEntry(
        eid=record["eid"],
        split=record["split"],
        tripleset=TripleSet(
            triples=tuple(_triple(t) for t in record["triples"]),
            domain=record["domain"],
            seen=record.get("seen", True),
        ),
        lexes=tuple(
            LexEntry(
                text=lex["text"],
                ordered_triples=tuple(_triple(t) for t in lex["order"]),
                sentence_breaks=tuple(tuple(s) for s in lex["breaks"]),
                template=tuple(lex["template"]),
                references=tuple(
                    ReferenceInstance(
                        entity=ref["entity"],
                        refex=tuple(ref["refex"]),
                        pre_context=tuple(ref.get("pre_context", ())),
                        post_context=tuple(ref.get("post_context", ())),
                        ref_type=ref.get("type"),
                    )
                    for ref in lex.get("references", ())
                ),
            )
            for lex in record["lexes"]
        ),
    )


def _read_records(file_path: Path) -> List[CorpusEntry]:
    entries = []
    try:
        for lineno, record in enumerate(iter_jsonl(file_path), start=1):
            try:
                entries.append(record_to_entry(record))
            except (KeyError, TypeError, ValueError) as e:
                raise CorpusParseError(str(file_path), lineno, f"invalid record: {e}") from e
    except JsonLineError as e:
        raise CorpusParseError(e.file_name, e.lineno, "invalid JSON") from e
    return entries


def write_corpus(corpus: Corpus, path: Union[str, Path]) -> int:
    """Write the interchange file, one entry per line."""
    n = write_jsonl(path, (entry_to_record(e) for e in corpus.entries))
    logger.info(f"Wrote {n} interchange records to {path}")
    return n


def read_corpus(path: Union[str, Path]) -> Corpus:
    return import_webnlg(path, "jsonl")


# ---------------------------------------------------------------------------
# Dataset extraction
# ---------------------------------------------------------------------------


def _group(
    entry: CorpusEntry, pairs: Iterable[Tuple[Tuple[str, ...], Tuple[str, ...]]]
) -> List[DatasetInstance]:
    grouped: Dict[Tuple[str, ...], Counter] = {}
    for source, target in pairs:
        grouped.setdefault(source, Counter())[target] += 1
    out = []
    for source, counter in grouped.items():
        targets = list(counter)
        out.append(
            DatasetInstance(
                eid=entry.eid,
                source=source,
                targets=tuple(targets),
                counts=tuple(counter[t] for t in targets),
                domain=entry.domain,
                seen=entry.seen,
                size=entry.tripleset.size,
            )
        )
    return out


def _instances(entry: CorpusEntry, task: str, min_order_size: int) -> List[DatasetInstance]:
    if task == "ordering":
        if entry.tripleset.size < min_order_size:
            return []
        source = tuple(canonical_linearize(entry.tripleset))
        return _group(entry, ((source, tuple(lex.ordered_predicates())) for lex in entry.lexes))
    if task == "structuring":
        return _group(
            entry,
            (
                (
                    tuple(linearize_ordered(lex.ordered_triples)),
                    tuple(structure_tokens(lex.ordered_predicates(), lex.sentence_breaks)),
                )
                for lex in entry.lexes
            ),
        )
    if task == "lexicalization":
        return _group(
            entry,
            (
                (
                    tuple(linearize_structured(lex.ordered_triples, lex.sentence_breaks)),
                    uncased_template(lex.template),
                )
                for lex in entry.lexes
            ),
        )
    if task == "e2e":
        source = tuple(canonical_linearize(entry.tripleset))
        return _group(entry, ((source, tuple(tokenize(lex.text))) for lex in entry.lexes))
    if task == "reg":
        return [
            DatasetInstance(
                eid=entry.eid,
                source=(ref.entity,),
                targets=(ref.refex,),
                counts=(1,),
                domain=entry.domain,
                seen=entry.seen,
                size=entry.tripleset.size,
                reference=ref,
            )
            for lex in entry.lexes
            for ref in lex.references
        ]
    raise ValueError(f"unknown task {task!r}, expected one of {', '.join(TASKS)}")


def extract_task_dataset(
    c: Corpus, task: str, min_order_size: int = 2
) -> Tuple[TaskDataset, TaskDataset, TaskDataset]:
    """Extract (train, dev, test) datasets for one stage.

    Sources are grouped per entry; ``targets`` are the distinct gold outputs
    and ``counts`` how many verbalizations produced each.

    Args:
        c: The corpus.
        task: ordering, structuring, lexicalization (or lex), reg, or e2e.
        min_order_size: Smallest triple set kept for ordering; a single
            triple has only one order.

    Raises:
        ValueError: If ``task`` is unknown.
    """
    task = TASK_ALIASES.get(task, task)
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}, expected one of {', '.join(TASKS)}")
    datasets = []
    for split in SPLITS:
        instances: List[DatasetInstance] = []
        for entry in c.split(split):
            instances.extend(_instances(entry, task, min_order_size))
        datasets.append(TaskDataset(task=task, split=split, instances=tuple(instances)))
        logger.debug(f"{task}/{split}: {len(instances)} sources")
    train, dev, test = datasets
    return train, dev, test


def dataset_sizes(c: Corpus, min_order_size: int = 2) -> Dict[str, Dict[str, Dict[str, int]]]:
    """Source, target and verbalization counts per task and split."""
    sizes: Dict[str, Dict[str, Dict[str, int]]] = {}
    for task in ("ordering", "structuring", "lexicalization", "reg"):
        sizes[task] = {
            ds.split: {
                "sources": ds.n_sources,
                "targets": ds.n_targets,
                "verbalizations": ds.n_verbalizations,
            }
            for ds in extract_task_dataset(c, task, min_order_size)
        }
    return sizes


def compare_with_reference(sizes: Mapping[str, Mapping[str, Mapping[str, int]]]) -> List[str]:
    """List every count that differs from the published extraction sizes."""
    lines = []
    for task, published in PUBLISHED_SIZES.items():
        for measure, expected in published.items():
            for split, want in zip(SPLITS, expected):
                got = sizes.get(task, {}).get(split, {}).get(measure)
                if got != want:
                    lines.append(f"{task}/{split} {measure}: got {got}, published {want}")
    return lines

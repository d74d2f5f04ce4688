"""Textual realization: inflect VP tags, choose determiners, detokenize.

Rules are read off the training corpus by aligning each gold template,
with its gold references substituted, against the tokenized gold text.
Keys never seen in training fall back to regular English morphology.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

import regex as re
from loguru import logger

from d2t.corpus import ENTITY_RE
from d2t.lexicalization import DTTag, EntityTag, Template, TemplateParseError, VPTag, Word, parse_token
from d2t.utils.file_utils import iter_jsonl, write_jsonl
from d2t.utils.frequency import FrequencyTable
from d2t.utils.models import Corpus, LexEntry
from d2t.utils.text_utils import detokenize, tokenize

VerbKey = Tuple[Optional[str], Optional[str], Optional[str], Optional[str], Optional[str], str]
DetKey = Tuple[str, str]

MAX_VERB_SPAN = 4

# lemma -> (past, past participle)
IRREGULAR_VERBS: Dict[str, Tuple[str, str]] = {
    "be": ("was", "been"),
    "have": ("had", "had"),
    "do": ("did", "done"),
    "bear": ("bore", "born"),
    "become": ("became", "become"),
    "build": ("built", "built"),
    "find": ("found", "found"),
    "fly": ("flew", "flown"),
    "give": ("gave", "given"),
    "go": ("went", "gone"),
    "grow": ("grew", "grown"),
    "hold": ("held", "held"),
    "know": ("knew", "known"),
    "lead": ("led", "led"),
    "leave": ("left", "left"),
    "make": ("made", "made"),
    "run": ("ran", "run"),
    "see": ("saw", "seen"),
    "sell": ("sold", "sold"),
    "speak": ("spoke", "spoken"),
    "stand": ("stood", "stood"),
    "take": ("took", "taken"),
    "win": ("won", "won"),
    "write": ("wrote", "written"),
}

_AN_PREFIXES = ("hour", "honest", "honor", "honour", "heir")
_A_PREFIXES = ("uni", "use", "usu", "uti", "euro", "one", "once", "ufo")
_VOWELS = "aeiou"
_DOUBLING = re.compile(r"^[^aeiou]*[aeiou][^aeiouwxy]$")


# ---------------------------------------------------------------------------
# Morphology
# ---------------------------------------------------------------------------


def _doubles(lemma: str) -> bool:
    return bool(_DOUBLING.match(lemma))


def third_singular(lemma: str) -> str:
    if lemma == "be":
        return "is"
    if lemma == "have":
        return "has"
    if lemma.endswith(("s", "x", "z", "ch", "sh", "o")):
        return lemma + "es"
    if len(lemma) > 1 and lemma.endswith("y") and lemma[-2] not in _VOWELS:
        return lemma[:-1] + "ies"
    return lemma + "s"


def past_tense(lemma: str, irregular: Mapping[str, Tuple[str, str]] = IRREGULAR_VERBS) -> str:
    if lemma in irregular:
        return irregular[lemma][0]
    return _regular_past(lemma)


def past_participle(lemma: str, irregular: Mapping[str, Tuple[str, str]] = IRREGULAR_VERBS) -> str:
    if lemma in irregular:
        return irregular[lemma][1]
    return _regular_past(lemma)


def _regular_past(lemma: str) -> str:
    if lemma.endswith("e"):
        return lemma + "d"
    if len(lemma) > 1 and lemma.endswith("y") and lemma[-2] not in _VOWELS:
        return lemma[:-1] + "ied"
    if _doubles(lemma):
        return lemma + lemma[-1] + "ed"
    return lemma + "ed"


def present_participle(lemma: str) -> str:
    if lemma.endswith("ie"):
        return lemma[:-2] + "ying"
    if lemma.endswith("e") and not lemma.endswith(("ee", "ye", "oe")) and lemma != "be":
        return lemma[:-1] + "ing"
    if _doubles(lemma):
        return lemma + lemma[-1] + "ing"
    return lemma + "ing"


def finite(
    lemma: str,
    tense: Optional[str],
    person: Optional[str],
    number: Optional[str],
    irregular: Mapping[str, Tuple[str, str]] = IRREGULAR_VERBS,
) -> str:
    """Finite form; missing person and number read as third person singular."""
    person = person or "3rd"
    number = number or "singular"
    singular = number == "singular"
    if lemma == "be":
        if tense == "past":
            return "was" if singular and person != "2nd" else "were"
        if singular and person == "1st":
            return "am"
        return "is" if singular and person == "3rd" else "are"
    if tense == "past":
        return past_tense(lemma, irregular)
    if singular and person == "3rd":
        return third_singular(lemma)
    return lemma


def conjugate(tag: VPTag, lemma: str, irregular: Mapping[str, Tuple[str, str]] = IRREGULAR_VERBS) -> List[str]:
    """Regular-morphology surface of a VP tag and its lemma.

    The auxiliary chain is (will) (have) (be: progressive) (be: passive) verb.
    A progressive tag with neither person nor number is participial: its
    auxiliary is carried by a tag of its own.
    """
    lemma = lemma.lower()
    aspect = tag.aspect or "simple"
    perfect = "perfect" in aspect
    progressive = "progressive" in aspect
    passive = tag.voice == "passive"
    if progressive and not perfect and tag.person is None and tag.number is None:
        return ["being", past_participle(lemma, irregular)] if passive else [present_participle(lemma)]

    chain: List[Tuple[str, str]] = []
    if perfect:
        chain.append(("have", "perfect"))
    if progressive:
        chain.append(("be", "progressive"))
    if passive:
        chain.append(("be", "passive"))
    chain.append((lemma, "main"))

    words: List[str] = []
    previous: Optional[str] = None
    for verb, role in chain:
        if previous is None:
            if tag.tense == "future":
                words.extend(["will", verb])
            else:
                words.append(finite(verb, tag.tense, tag.person, tag.number, irregular))
        elif previous == "progressive":
            words.append(present_participle(verb))
        else:
            words.append(past_participle(verb, irregular))
        previous = role
    return words


def letter_class(word: str) -> str:
    return "vowel" if word[:1].lower() in _VOWELS else "consonant"


def default_determiner(form: str, following: str, written: str) -> str:
    """Determiner without a learned rule: a/an by exception list then vowel letter."""
    if form == "defined":
        return "the"
    if form == "undefined":
        lowered = following.lower()
        if lowered.startswith(_AN_PREFIXES):
            return "an"
        if lowered.startswith(_A_PREFIXES):
            return "a"
        return "an" if letter_class(lowered) == "vowel" else "a"
    return written


def _lemmas(lemmas: Union[str, Sequence[str]]) -> Tuple[str, ...]:
    run = tuple(w.lower() for w in (lemmas.split() if isinstance(lemmas, str) else lemmas))
    if not run:
        raise ValueError("a VP tag needs at least one lemma")
    return run


def lemma_run(tokens: Sequence[object], start: int, verb_lemmas: Set[str]) -> int:
    """Length of the lemma run at ``tokens[start]``, a Word that always counts."""
    end = start + 1
    while end < len(tokens):
        tok = tokens[end]
        if not isinstance(tok, Word) or tok.text.lower() not in verb_lemmas:
            break
        end += 1
    return end - start


# ---------------------------------------------------------------------------
# Rule table
# ---------------------------------------------------------------------------


@dataclass
class RuleTable:
    """Majority surfaces for (VP attributes, lemmas) and (DT form, next-letter class).

    A VP tag governs the run of verb lemmas that follows it, so "be run" after
    a present tag is one key whose surface is "is run". Verb lemmas are the
    words that head a VP tag somewhere in training; the run stops at the first
    other token. Verb keys store the run space-joined.
    """

    verb_rules: FrequencyTable = field(default_factory=lambda: FrequencyTable(tie_key=" ".join))
    det_rules: FrequencyTable = field(default_factory=lambda: FrequencyTable(tie_key=str))
    irregular_verbs: Dict[str, Tuple[str, str]] = field(default_factory=lambda: dict(IRREGULAR_VERBS))
    aligned: int = 0
    skipped: int = 0
    verb_lemmas: Set[str] = field(default_factory=set)
    _by_lemma: Dict[str, List[VerbKey]] = field(default_factory=lambda: defaultdict(list), repr=False)

    def add_verb(self, tag: VPTag, lemmas: Union[str, Sequence[str]], surface: Sequence[str], count: int = 1) -> None:
        run = _lemmas(lemmas)
        self.verb_lemmas.update(run)
        key: VerbKey = (*tag.attributes(), " ".join(run))  # type: ignore[assignment]
        if key not in self.verb_rules:
            self._by_lemma[key[-1]].append(key)
        self.verb_rules.add(key, tuple(w.lower() for w in surface), count)

    def add_determiner(self, form: str, following: str, surface: str, count: int = 1) -> None:
        self.det_rules.add((form, letter_class(following)), surface.lower(), count)

    def verb(self, tag: VPTag, lemmas: Union[str, Sequence[str]]) -> List[str]:
        """Surface of a VP tag: exact rule, wildcard rule on null attributes, morphology.

        Morphology inflects the first lemma of a run and keeps the rest as written.
        """
        run = _lemmas(lemmas)
        lemma = " ".join(run)
        key = (*tag.attributes(), lemma)
        exact = self.verb_rules.majority(key)
        if exact is not None:
            return list(exact)
        wanted = tag.attributes()
        if any(v is None for v in wanted):
            totals: Dict[Tuple[str, ...], int] = defaultdict(int)
            for candidate in self._by_lemma.get(lemma, ()):
                if all(w is None or w == c for w, c in zip(wanted, candidate[:-1])):
                    for surface, count in self.verb_rules.candidates(candidate):
                        totals[surface] += count
            if totals:
                return list(min(totals, key=lambda s: (-totals[s], " ".join(s))))
        return conjugate(tag, run[0], self.irregular_verbs) + list(run[1:])

    def determiner(self, form: str, following: str, written: str = "") -> str:
        lowered = following.lower()
        if form == "undefined" and lowered.startswith(_AN_PREFIXES + _A_PREFIXES):
            return default_determiner(form, following, written)
        learned = self.det_rules.majority((form, letter_class(following)))
        if learned is not None:
            return learned
        return default_determiner(form, following, written)

    def save(self, path: Union[str, Path]) -> int:
        records: List[dict] = []
        for key in sorted(self.verb_rules.keys(), key=lambda k: tuple(v or "" for v in k)):
            records.append(
                {
                    "table": "verb",
                    "key": list(key),
                    "values": [{"value": list(v), "count": c} for v, c in self.verb_rules.candidates(key)],
                }
            )
        for key in sorted(self.det_rules.keys()):
            records.append(
                {
                    "table": "det",
                    "key": list(key),
                    "values": [{"value": v, "count": c} for v, c in self.det_rules.candidates(key)],
                }
            )
        n = write_jsonl(path, records)
        logger.info(f"Saved {n} realization rules to {path}")
        return n

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RuleTable":
        rules = cls()
        for record in iter_jsonl(path):
            key = record["key"]
            for item in record["values"]:
                if record["table"] == "verb":
                    rules.add_verb(VPTag(*key[:5]), key[5], item["value"], int(item["count"]))
                else:
                    rules.det_rules.add((key[0], key[1]), item["value"], int(item["count"]))
        return rules


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------

Alignment = List[Tuple[str, object, str, Tuple[str, ...]]]


def _substituted(lex: LexEntry) -> Optional[List[Union[Word, VPTag, DTTag]]]:
    """Template tokens with gold references in place of entity slots."""
    refs = iter(lex.references)
    out: List[Union[Word, VPTag, DTTag]] = []
    for position, raw in enumerate(lex.template):
        if ENTITY_RE.match(raw):
            ref = next(refs, None)
            if ref is None:
                return None
            out.extend(Word(w) for w in ref.refex)
            continue
        try:
            tok = parse_token(raw, position)
        except TemplateParseError:
            return None
        if isinstance(tok, EntityTag):
            return None
        out.append(tok)
    return out


def align(
    tokens: Sequence[Union[Word, VPTag, DTTag]], text: Sequence[str], verb_lemmas: Iterable[str] = ()
) -> Optional[Alignment]:
    """Match substituted template tokens against text tokens.

    Words match case-insensitively; a DT tag with its determiner word covers
    one text token; a VP tag with its run of lemmas covers 1 to 4 text tokens
    plus one per extra lemma, shortest first. The run takes every following
    word in ``verb_lemmas``.

    Returns:
        Optional[Alignment]: ("vp", tag, space-joined lemmas, surface) and
            ("dt", tag, following word, surface) items, or None if no
            alignment exists.
    """
    verbs = {w.lower() for w in verb_lemmas}
    lowered = [t.lower() for t in text]
    failed = set()

    def go(i: int, j: int) -> Optional[Alignment]:
        if i == len(tokens):
            return [] if j == len(lowered) else None
        if (i, j) in failed:
            return None
        tok = tokens[i]
        result: Optional[Alignment] = None
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        if isinstance(tok, Word):
            if j < len(lowered) and lowered[j] == tok.text.lower():
                result = go(i + 1, j + 1)
        elif isinstance(tok, VPTag) and isinstance(nxt, Word):
            n = lemma_run(tokens, i + 1, verbs)
            lemmas = " ".join(t.text.lower() for t in tokens[i + 1 : i + 1 + n])  # type: ignore[union-attr]
            for span in range(1, MAX_VERB_SPAN + n):
                if j + span > len(lowered):
                    break
                rest = go(i + 1 + n, j + span)
                if rest is not None:
                    result = [("vp", tok, lemmas, tuple(lowered[j : j + span]))] + rest
                    break
        elif isinstance(tok, DTTag) and isinstance(nxt, Word) and j < len(lowered):
            rest = go(i + 2, j + 1)
            if rest is not None:
                after = tokens[i + 2] if i + 2 < len(tokens) else None
                following = after.text if isinstance(after, Word) else ""
                result = [("dt", tok, following, (lowered[j],))] + rest
        if result is None:
            failed.add((i, j))
        return result

    return go(0, 0)


def rules_extract(c: Corpus, splits: Iterable[str] = ("train",)) -> RuleTable:
    """Extract verb and determiner rules from gold template/text pairs.

    Verb lemmas are collected from every template first, so each VP tag is
    aligned with its full lemma run. Instances whose template cannot be
    aligned with the text are skipped and counted in ``skipped``.
    """
    rules = RuleTable()
    substituted = [
        (entry.eid, lex, _substituted(lex)) for split in splits for entry in c.split(split) for lex in entry.lexes
    ]
    for _, _, tokens in substituted:
        if tokens is None:
            continue
        for tok, nxt in zip(tokens, tokens[1:]):
            if isinstance(tok, VPTag) and isinstance(nxt, Word):
                rules.verb_lemmas.add(nxt.text.lower())
    for eid, lex, tokens in substituted:
        alignment = align(tokens, tokenize(lex.text), rules.verb_lemmas) if tokens is not None else None
        if alignment is None:
            rules.skipped += 1
            logger.debug(f"Cannot align template of {eid}")
            continue
        rules.aligned += 1
        for kind, tag, word, surface in alignment:
            if kind == "vp":
                rules.add_verb(tag, word, surface)  # type: ignore[arg-type]
            else:
                rules.add_determiner(tag.form, word, surface[0])  # type: ignore[attr-defined]
    logger.info(
        f"Realization rules: {len(rules.verb_rules)} verb keys, {len(rules.det_rules)} determiner keys, "
        f"{rules.aligned} aligned, {rules.skipped} skipped"
    )
    return rules


# ---------------------------------------------------------------------------
# Realization
# ---------------------------------------------------------------------------


def realize_tokens(rt: Template, rules: RuleTable) -> List[str]:
    """Inflected word tokens of a referenced template.

    Raises:
        ValueError: If the template still contains entity slots.
    """
    tokens = rt.tokens
    out: List[str] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        if isinstance(tok, EntityTag):
            raise ValueError(f"unresolved entity slot {tok.serialize()}; run referring expression generation first")
        if isinstance(tok, Word):
            out.append(tok.text)
            i += 1
        elif isinstance(tok, VPTag):
            if not isinstance(nxt, Word):
                logger.warning(f"Dropping dangling {tok.serialize()}")
                i += 1
                continue
            n = lemma_run(tokens, i + 1, rules.verb_lemmas)
            out.extend(rules.verb(tok, [t.text for t in tokens[i + 1 : i + 1 + n]]))  # type: ignore[union-attr]
            i += 1 + n
        else:
            if not isinstance(nxt, Word):
                logger.warning(f"Dropping dangling {tok.serialize()}")
                i += 1
                continue
            after = tokens[i + 2] if i + 2 < len(tokens) else None
            following = after.text if isinstance(after, Word) else ""
            out.append(rules.determiner(tok.form, following, nxt.text))
            i += 2
    return out


def realize(rt: Template, rules: RuleTable) -> str:
    """Final text of a referenced template."""
    return detokenize(realize_tokens(rt, rules))

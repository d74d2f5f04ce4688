from functools import lru_cache
from typing import Iterable, List, Sequence, Tuple

import regex as re
from nltk.tokenize import word_tokenize

_CAMEL = re.compile(r"\p{Lu}?\p{Ll}+|\p{Lu}+(?=\p{Lu}\p{Ll}|\b|\d)|\p{Lu}+|\d+")
_TRAILING_PERIOD = re.compile(r"^([^.]+)\.$")
_ATTACH_LEFT = {".", ",", ";", ":", "!", "?", ")", "]", "%", "''", "'s", "n't", "'re", "'m", "'ve", "'ll", "'d"}
_ATTACH_RIGHT = {"(", "[", "``", "$"}
_SENTENCE_END = {".", "!", "?"}


@lru_cache(maxsize=65536)
def _tokenize_cached(text: str) -> Tuple[str, ...]:
    out: List[str] = []
    for tok in word_tokenize(text, preserve_line=True):
        match = _TRAILING_PERIOD.match(tok)
        if match and len(tok) > 1:
            out.extend([match.group(1), "."])
        else:
            out.append(tok)
    return tuple(out)


def tokenize(text: str) -> List[str]:
    """Word-tokenize a text line.

    Treebank rules split only the final period of a line, so a period glued to
    a plain word is split off as well. Abbreviations with inner periods
    (``S.S.D.``) stay whole.
    """
    if not text.strip():
        return []
    return list(_tokenize_cached(" ".join(text.split())))


def lower_tokens(tokens: Iterable[str]) -> Tuple[str, ...]:
    return tuple(tok.lower() for tok in tokens)


def camel_case_words(predicate: str) -> List[str]:
    """Split a camelCase predicate into lowercase words.

    >>> camel_case_words("birthPlace")
    ['birth', 'place']
    """
    words = [w.lower() for w in _CAMEL.findall(predicate)]
    return words or [predicate.lower()]


def detokenize(tokens: Sequence[str]) -> str:
    """Join tokens into text: attach punctuation, capitalize sentence starts."""
    pieces: List[str] = []
    capitalize = True
    glue_next = False
    for tok in tokens:
        surface = '"' if tok in ("``", "''") else tok
        if capitalize and tok not in _ATTACH_LEFT and tok not in _ATTACH_RIGHT:
            if surface[:1].isalpha():
                surface = surface[0].upper() + surface[1:]
            capitalize = False
        if not pieces or glue_next or tok in _ATTACH_LEFT:
            pieces.append(surface)
        else:
            pieces.append(" " + surface)
        glue_next = tok in _ATTACH_RIGHT
        if tok in _SENTENCE_END:
            capitalize = True
    return "".join(pieces)

"""Tokenization and lexical-overlap helpers shared across modules.

Two tokenizers live here: a lowercase alphanumeric tokenizer for
similarity scoring, and a whitespace+punctuation tokenizer used for
token accounting (chunk sizes, retrieved-token totals). The counting
tokenizer is deliberately simple and pluggable; absolute token numbers
are therefore comparable only within a run, never across tokenizers.
"""

from __future__ import annotations

import re

_WORD_RE = re.compile(r"[a-z0-9]+")
_COUNT_RE = re.compile(r"\w+|[^\w\s]")

# Function words ignored by overlap scoring. Negation words are kept out
# on purpose: they carry the signal for contradiction detection.
STOPWORDS = frozenset(
    """
    a about after again all am an and any are as at be been before being
    both but by can could did do does doing down during each few for from
    further had has have having he her here hers him his how i if in into
    is it its itself just me more most my of off on once only or other our
    ours out over s same she should so some such t than that the their
    theirs them then there these they this those through to too under
    until up very was we were what when where which while who whom why
    will with would you your yours
    """.split()
)

_NEGATION_RE = re.compile(
    r"\b(?:no|not|never|none|cannot|can't|won't|don't|doesn't|didn't|haven't"
    r"|hasn't|isn't|aren't|wasn't|weren't|wouldn't|couldn't|shouldn't|unable"
    r"|without|lack|lacks|lacking|missing)\b",
    re.IGNORECASE,
)


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric tokens, in order."""
    return _WORD_RE.findall(text.lower())


def content_tokens(text: str) -> set[str]:
    """Token set with stopwords removed (falls back to all tokens)."""
    toks = set(tokenize(text))
    content = toks - STOPWORDS
    return content or toks


def jaccard(a: str, b: str) -> float:
    """Jaccard similarity of the content-token sets of two strings."""
    ta, tb = content_tokens(a), content_tokens(b)
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def coverage(phrase: str, target: str) -> float:
    """Fraction of the phrase's content tokens present in the target."""
    ta = content_tokens(phrase)
    if not ta:
        return 0.0
    return len(ta & content_tokens(target)) / len(ta)


def has_negation(text: str) -> bool:
    return bool(_NEGATION_RE.search(text))


def count_tokens(text: str) -> int:
    """Token count under the whitespace+punctuation tokenizer."""
    return len(_COUNT_RE.findall(text))


def split_count_tokens(text: str) -> list[str]:
    return _COUNT_RE.findall(text)


def count_token_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of counting-tokenizer tokens, in order."""
    return [m.span() for m in _COUNT_RE.finditer(text)]

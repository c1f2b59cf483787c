"""Parsing and rendering of linker branches.

A linker encodes the possible outcomes of a step as "If <condition>,
then <next intent>.[TOKEN]" sentences, one per branch. The same grammar
appears in two carrier forms: a markdown bullet list (one branch per
line) and a single concatenated sentence string used by the hash-key
JSON dialect. Both are accepted here.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

TOKEN_CONTINUE = "CONTINUE"
TOKEN_CROSS = "CROSS"
TOKEN_MITIGATE = "MITIGATE"
VALID_TOKENS = frozenset({TOKEN_CONTINUE, TOKEN_CROSS, TOKEN_MITIGATE})

# Catch-all branch condition: matched when no other branch fits.
OTHERWISE = "Otherwise"

# Any trailing bracketed tag, including unknown ones ("[FOO]"); token
# validity is a validation concern, not a parsing one.
_TRAILING_TOKEN_RE = re.compile(r"\[([A-Za-z][A-Za-z _-]*)\]\s*$")
# Known tokens only, used to split concatenated sentence strings.
_KNOWN_TOKEN_SPLIT_RE = re.compile(r"(?<=\[CONTINUE\])|(?<=\[CROSS\])|(?<=\[MITIGATE\])")
_BULLET_RE = re.compile(r"^\s*(?:[-*+]|\d+[.)])\s+")
_IF_THEN_RE = re.compile(r"^if\s+(.*?),?\s+then\s+(.*)$", re.IGNORECASE | re.DOTALL)
_OTHERWISE_RE = re.compile(r"^otherwise[,.]?\s*(.*)$", re.IGNORECASE | re.DOTALL)
_IF_COMMA_RE = re.compile(r"^if\s+(.*?),\s+(.*)$", re.IGNORECASE | re.DOTALL)


class LinkerParseError(ValueError):
    """Raised when a linker block contains lines that do not parse."""


@dataclass(frozen=True)
class LinkerBranch:
    """One "if condition then next-intent [TOKEN]" edge.

    ``next_intent`` doubles as the retrieval query for the following
    round, so it is kept verbatim as written in the source text.
    """

    condition: str
    next_intent: str
    token: str

    @property
    def is_terminal(self) -> bool:
        return self.token == TOKEN_MITIGATE

    @property
    def is_catch_all(self) -> bool:
        return self.condition.strip().lower() == OTHERWISE.lower()


def _split_segments(text: str) -> list[tuple[int, str]]:
    """Split raw linker text into (line_number, sentence) segments.

    Lines are the primary unit; a single line holding several
    token-terminated sentences (the concatenated JSON form) is split
    after each known token.
    """
    segments: list[tuple[int, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = _BULLET_RE.sub("", line.strip())
        if not line:
            continue
        parts = [p.strip() for p in _KNOWN_TOKEN_SPLIT_RE.split(line)]
        for part in parts:
            if part:
                segments.append((lineno, part))
    return segments


def _parse_segment(segment: str) -> tuple[str, str] | None:
    """Split one sentence (token already removed) into condition and intent."""
    segment = segment.strip().rstrip(".").strip()
    m = _IF_THEN_RE.match(segment)
    if m:
        return m.group(1).strip(), m.group(2).strip()
    m = _OTHERWISE_RE.match(segment)
    if m:
        return OTHERWISE, m.group(1).strip()
    m = _IF_COMMA_RE.match(segment)
    if m:
        return m.group(1).strip(), m.group(2).strip()
    return None


def parse_linker_block(text: str) -> list[LinkerBranch]:
    """Parse a linker block into ordered branches.

    Accepts bullet lines, bare sentences, or the concatenated sentence
    string. Empty input yields an empty list. Lines that look like a
    branch but carry no trailing bracketed token, and lines that do not
    fit the grammar at all, raise :class:`LinkerParseError` with line
    numbers.
    """
    if not text or not text.strip():
        return []
    branches: list[LinkerBranch] = []
    problems: list[str] = []
    for lineno, segment in _split_segments(text):
        token_match = _TRAILING_TOKEN_RE.search(segment)
        if token_match is None:
            if _IF_THEN_RE.match(segment.rstrip(".")) or _IF_COMMA_RE.match(segment.rstrip(".")):
                problems.append(f"line {lineno}: missing linker token")
            else:
                problems.append(f"line {lineno}: malformed linker line: {segment[:60]!r}")
            continue
        token = token_match.group(1).strip().upper().replace(" ", "_")
        body = segment[: token_match.start()]
        parsed = _parse_segment(body)
        if parsed is None:
            problems.append(f"line {lineno}: malformed linker line: {segment[:60]!r}")
            continue
        condition, intent = parsed
        branches.append(LinkerBranch(condition=condition, next_intent=intent, token=token))
    if problems:
        raise LinkerParseError("; ".join(problems))
    return branches


def render_branch_sentence(branch: LinkerBranch) -> str:
    """Render one branch in canonical sentence form."""
    if branch.is_catch_all:
        return f"{OTHERWISE}, {branch.next_intent}.[{branch.token}]"
    return f"If {branch.condition}, then {branch.next_intent}.[{branch.token}]"


def render_linker_text(branches: list[LinkerBranch] | tuple[LinkerBranch, ...]) -> str:
    """Render branches as the concatenated sentence string ("" when empty)."""
    return " ".join(render_branch_sentence(b) for b in branches)


def render_linker_block(branches: list[LinkerBranch] | tuple[LinkerBranch, ...]) -> str:
    """Render branches as a markdown bullet list, one branch per line."""
    return "\n".join(f"- {render_branch_sentence(b)}" for b in branches)

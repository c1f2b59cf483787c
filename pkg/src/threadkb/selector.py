"""Prerequisite checking and LU selection over retrieval candidates.

Selection is rule-based and deterministic by default: candidates stay in
retrieval order, prerequisite satisfaction is judged by lexical overlap
against session context, and unknown prerequisites trigger a
clarification question instead of a guess. A gateway-assisted path runs
the selection prompt when configured and falls back to the rules on any
reply problem.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from enum import Enum

from . import prompts
from .gateway import ChatGateway, GatewayError, script_tag
from .model import LogicUnit, export_paper_json
from .store import RetrievalResult
from .tokens import STOPWORDS, coverage, has_negation, tokenize

PREREQ_OVERLAP_FLOOR = 0.6

_PHRASE_SPLIT_RE = re.compile(r"[.;\n]")


class PrereqStatus(Enum):
    MET = "met"
    UNMET = "unmet"
    UNKNOWN = "unknown"


class OutcomeKind(Enum):
    SELECTED = "selected"
    CLARIFY = "clarify"
    NO_INFO = "no_info"


@dataclass(frozen=True)
class SelectionContext:
    """Everything selection may consult; immutable, append-only growth."""

    question: str
    history: tuple[tuple[str, str], ...] = ()
    completed_headers: tuple[str, ...] = ()
    facts: tuple[str, ...] = ()

    def with_fact(self, fact: str) -> "SelectionContext":
        return replace(self, facts=self.facts + (fact,))

    def with_completed(self, header: str) -> "SelectionContext":
        return replace(self, completed_headers=self.completed_headers + (header,))

    def with_history(self, role: str, text: str) -> "SelectionContext":
        return replace(self, history=self.history + ((role, text),))


@dataclass(frozen=True)
class SelectionOutcome:
    kind: OutcomeKind
    lu_ids: tuple[str, ...] = ()
    explanations: tuple[str, ...] = ()
    question: str = ""
    unmet_phrase: str = ""
    rephrased_query: str = ""


def prerequisite_phrases(prerequisite: str) -> list[str]:
    """Condition phrases, split on sentence boundaries, kept verbatim."""
    return [p.strip() for p in _PHRASE_SPLIT_RE.split(prerequisite) if p.strip()]


def _targets(ctx: SelectionContext) -> list[str]:
    return [ctx.question, *ctx.completed_headers, *ctx.facts]


def _contradicts(phrase: str, target: str) -> bool:
    """True when the target negates the phrase it otherwise covers."""
    if not has_negation(target):
        return False
    positive = " ".join(
        t for t in tokenize(target) if t not in ("no", "not", "never", "none")
    )
    return coverage(phrase, positive) >= PREREQ_OVERLAP_FLOOR


def check_prerequisite(lu: LogicUnit, ctx: SelectionContext) -> PrereqStatus:
    """Lexical prerequisite check against question, steps done, and facts.

    A phrase counts as satisfied when ≥ 60% of its content tokens appear
    in one context entry; as contradicted when a negated entry covers
    it. Contradiction anywhere wins over satisfaction elsewhere.
    """
    phrases = prerequisite_phrases(lu.prerequisite)
    if not phrases:
        return PrereqStatus.MET
    targets = _targets(ctx)
    all_met = True
    for phrase in phrases:
        if any(_contradicts(phrase, t) for t in targets):
            return PrereqStatus.UNMET
        if not any(coverage(phrase, t) >= PREREQ_OVERLAP_FLOOR for t in targets):
            all_met = False
    return PrereqStatus.MET if all_met else PrereqStatus.UNKNOWN


def first_unmatched_phrase(lu: LogicUnit, ctx: SelectionContext) -> str:
    targets = _targets(ctx)
    for phrase in prerequisite_phrases(lu.prerequisite):
        if not any(coverage(phrase, t) >= PREREQ_OVERLAP_FLOOR for t in targets):
            return phrase
    return lu.prerequisite.strip()


_VOWELS = "aeiou"


def _gerund(verb: str) -> str:
    word = verb.lower()
    if len(word) > 2 and word.endswith("e") and not word.endswith(("ee", "ye")):
        return word[:-1] + "ing"
    if (
        len(word) >= 3
        and word[-1] not in _VOWELS + "wxy"
        and word[-2] in _VOWELS
        and word[-3] not in _VOWELS
    ):
        return word + word[-1] + "ing"
    return word + "ing"


def gerund_phrase(header: str) -> str:
    """Header as an activity: "Check the Server Load" -> "checking the server load"."""
    words = header.strip().rstrip(".!?").split()
    if not words:
        return ""
    return " ".join([_gerund(words[0])] + [w.lower() for w in words[1:]])


def clarify_question(lu: LogicUnit, phrase: str) -> str:
    """Clarification template; the phrase is quoted verbatim."""
    return f"Before {gerund_phrase(lu.header)}, do you have {phrase}?"


# ---------------------------------------------------------------------------
# gateway-assisted choice


def _chat_history_text(ctx: SelectionContext) -> str:
    if not ctx.history:
        return "(empty)"
    return "\n".join(f"{role}: {text}" for role, text in ctx.history)


def _gateway_choice(
    survivors: list[RetrievalResult],
    query: str,
    ctx: SelectionContext,
    gateway: ChatGateway,
) -> SelectionOutcome | None:
    """Run the selection prompt; None means fall back to rule-based."""
    lu_list = "[" + ", ".join(export_paper_json(r.lu) for r in survivors) + "]"
    prompt = (
        prompts.fill(
            prompts.LU_SELECTION_PROMPT,
            LU_LIST=lu_list,
            QUERY=query,
            CHAT_HISTORY=_chat_history_text(ctx),
        )
        + "\n"
        + script_tag("select")
    )
    try:
        reply = gateway.complete_json(prompt)
    except GatewayError:
        return None
    if isinstance(reply, dict):
        if "NO_INFO_EXPLANATION" in reply:
            return SelectionOutcome(
                OutcomeKind.NO_INFO, explanations=(str(reply["NO_INFO_EXPLANATION"]),)
            )
        reply = [reply]
    if not isinstance(reply, list) or not reply:
        return None
    ids: list[str] = []
    notes: list[str] = []
    rephrased = ""
    for entry in reply:
        if not isinstance(entry, dict) or "INDEX" not in entry:
            return None
        try:
            idx = int(entry["INDEX"])
        except (TypeError, ValueError):
            return None
        if not 0 <= idx < len(survivors):
            return None
        ids.append(survivors[idx].lu.id)
        notes.append(str(entry.get("EXPLANATION", "")))
        rephrased = rephrased or str(entry.get("REPHRASED_QUERY", ""))
    return SelectionOutcome(
        OutcomeKind.SELECTED,
        lu_ids=tuple(ids),
        explanations=tuple(notes),
        rephrased_query=rephrased,
    )


def select(
    candidates: list[RetrievalResult],
    query: str,
    ctx: SelectionContext,
    gateway: ChatGateway | None = None,
) -> SelectionOutcome:
    """Choose the LU(s) to present, or ask, or report no coverage.

    Unmet candidates are dropped unconditionally; the gateway is only
    ever offered the survivors, so its answer cannot resurrect one.
    """
    statuses = [check_prerequisite(r.lu, ctx) for r in candidates]
    survivors = [
        (r, s) for r, s in zip(candidates, statuses) if s is not PrereqStatus.UNMET
    ]
    if not survivors:
        dropped = ", ".join(r.lu.header for r in candidates) or "none retrieved"
        return SelectionOutcome(
            OutcomeKind.NO_INFO,
            explanations=(f"all candidates had unmet prerequisites: {dropped}",),
        )

    top, top_status = survivors[0]
    if top_status is PrereqStatus.UNKNOWN:
        phrase = first_unmatched_phrase(top.lu, ctx)
        return SelectionOutcome(
            OutcomeKind.CLARIFY,
            lu_ids=(top.lu.id,),
            question=clarify_question(top.lu, phrase),
            unmet_phrase=phrase,
        )

    if gateway is not None:
        outcome = _gateway_choice([r for r, _ in survivors], query, ctx, gateway)
        if outcome is not None:
            return outcome
    return SelectionOutcome(
        OutcomeKind.SELECTED,
        lu_ids=(top.lu.id,),
        explanations=(f"highest-ranked candidate with prerequisites met: {top.lu.header}",),
    )

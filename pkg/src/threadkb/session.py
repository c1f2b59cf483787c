"""Multi-turn session engine: retrieve, select, instruct, match feedback.

States are immutable snapshots; every engine call returns a new state
plus the response for that turn, which makes replay and concurrent
sessions trivial. Linker tokens drive the loop: CONTINUE re-retrieves
within the current guide, CROSS widens scope to the whole KB, MITIGATE
ends the session. Sessions always terminate: terminal statuses absorb,
and a turn budget backstops everything else.
"""

from __future__ import annotations

import re
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum

from .gateway import ChatGateway, GatewayError, script_tag
from .linker import TOKEN_CROSS, TOKEN_MITIGATE, LinkerBranch, render_linker_block
from .model import PLACEHOLDER_RE, LogicUnit, LUType
from .prompts import BRANCH_MATCH_PROMPT, fill
from .selector import (
    OutcomeKind,
    SelectionContext,
    SelectionOutcome,
    select,
)
from .store import KnowledgeBase, RetrievalResult, retrieve
from .tokens import jaccard

BRANCH_MATCH_FLOOR = 0.3
SCORE_FLOOR = 0.05


class SessionStatus(str, Enum):
    ACTIVE = "active"
    AWAITING_FEEDBACK = "awaiting_feedback"
    AWAITING_CLARIFICATION = "awaiting_clarification"
    MITIGATED = "mitigated"
    ESCALATED = "escalated"
    NO_INFO = "no_info"
    EXHAUSTED = "exhausted"


TERMINAL_STATUSES = frozenset(
    {
        SessionStatus.MITIGATED,
        SessionStatus.ESCALATED,
        SessionStatus.NO_INFO,
        SessionStatus.EXHAUSTED,
    }
)


class ResponseKind(str, Enum):
    PLAN = "plan"
    STEP_INSTRUCTION = "step_instruction"
    CLARIFY_QUESTION = "clarify_question"
    MITIGATED = "mitigated"
    ESCALATE = "escalate"
    NO_INFO = "no_info"


class SessionError(RuntimeError):
    """Call made against a session in the wrong status."""


@dataclass(frozen=True)
class SessionConfig:
    retrieve_k: int = 5
    score_floor: float = SCORE_FLOOR
    max_turns: int = 20
    branch_floor: float = BRANCH_MATCH_FLOOR
    single_turn: bool = False
    use_gateway_selection: bool = False
    use_gateway_branch_match: bool = False

    def __post_init__(self) -> None:
        if self.max_turns <= 0:
            raise ValueError(f"max_turns must be positive: {self.max_turns}")
        if self.retrieve_k <= 0:
            raise ValueError(f"retrieve_k must be positive: {self.retrieve_k}")


@dataclass(frozen=True)
class TurnRecord:
    """One accepted call: what was asked, retrieved, selected, answered."""

    turn: int
    kind: str
    query: str = ""
    input_text: str = ""
    top_ids: tuple[str, ...] = ()
    selected_id: str = ""
    branch_index: int = -1
    branch_token: str = ""
    response_text: str = ""
    cross_jump: bool = False

    def to_record(self) -> dict:
        return {
            "turn": self.turn,
            "kind": self.kind,
            "query": self.query,
            "input_text": self.input_text,
            "top_ids": list(self.top_ids),
            "selected_id": self.selected_id,
            "branch_index": self.branch_index,
            "branch_token": self.branch_token,
            "response_text": self.response_text,
            "cross_jump": self.cross_jump,
        }


@dataclass(frozen=True)
class TurnResponse:
    kind: ResponseKind
    text: str
    lu_id: str = ""
    branches: tuple[LinkerBranch, ...] = ()


@dataclass(frozen=True)
class SessionState:
    session_id: str
    ctx: SelectionContext
    status: SessionStatus
    turn_count: int = 0
    current_lu_id: str = ""
    current_doc_id: str = ""
    pending_phrase: str = ""
    cached_candidates: tuple[str, ...] = ()
    cached_query: str = ""
    no_match_retries: int = 0
    transcript: tuple[TurnRecord, ...] = ()

    @property
    def is_terminal(self) -> bool:
        return self.status in TERMINAL_STATUSES


# ---------------------------------------------------------------------------
# placeholder substitution


def _fact_value(placeholder: str, facts: tuple[str, ...]) -> str:
    """Look for "<CLUSTER NAME>" style values asserted as "cluster name is X"."""
    words = [w.lower() for w in re.findall(r"[A-Za-z0-9]+", placeholder)]
    if not words:
        return ""
    pattern = re.compile(
        r"\b" + r"\s+".join(map(re.escape, words)) + r"\s*(?:is|=|:)\s*([^\s,.;]+)",
        re.IGNORECASE,
    )
    for fact in reversed(facts):
        m = pattern.search(fact)
        if m:
            return m.group(1)
    return ""


def substitute_placeholders(
    body: str, defaults: dict[str, str], facts: tuple[str, ...] = ()
) -> str:
    """Fill placeholders from session facts first, then default values.

    Unresolved placeholders stay visible so the user knows what to
    supply.
    """

    def repl(m: re.Match) -> str:
        ph = m.group(0)
        return _fact_value(ph, facts) or defaults.get(ph, "") or ph

    return PLACEHOLDER_RE.sub(repl, body)


# ---------------------------------------------------------------------------
# branch matching


def match_branch(
    outcome_text: str,
    branches: tuple[LinkerBranch, ...],
    floor: float = BRANCH_MATCH_FLOOR,
) -> int | None:
    """Index of the branch whose condition best matches the outcome.

    Catch-all branches never compete on similarity; one is used as the
    fallback when no conditioned branch reaches the floor.
    """
    best_idx: int | None = None
    best_score = 0.0
    catch_all: int | None = None
    for i, branch in enumerate(branches):
        if branch.is_catch_all:
            if catch_all is None:
                catch_all = i
            continue
        score = jaccard(outcome_text, branch.condition)
        if score > best_score:
            best_idx, best_score = i, score
    if best_idx is not None and best_score >= floor:
        return best_idx
    return catch_all


# ---------------------------------------------------------------------------
# engine


@dataclass
class SessionEngine:
    """Drives sessions over one pinned KB snapshot."""

    kb: KnowledgeBase
    config: SessionConfig = field(default_factory=SessionConfig)
    gateway: ChatGateway | None = None

    # -- helpers ----------------------------------------------------------

    def _retrieve(
        self, query: str, doc_id: str | None = None, exclude: set[str] | None = None
    ) -> list[RetrievalResult]:
        results = retrieve(
            self.kb, query, k=self.config.retrieve_k, doc_id=doc_id, exclude_ids=exclude
        )
        return [r for r in results if r.score >= self.config.score_floor]

    def _select(
        self, results: list[RetrievalResult], query: str, ctx: SelectionContext
    ) -> SelectionOutcome:
        gateway = self.gateway if self.config.use_gateway_selection else None
        return select(results, query, ctx, gateway)

    def _present(self, lu: LogicUnit, ctx: SelectionContext) -> str:
        return substitute_placeholders(lu.body, lu.default_parameters, ctx.facts)

    def _finish_turn(
        self, state: SessionState, response: TurnResponse, record: TurnRecord
    ) -> tuple[SessionState, TurnResponse]:
        state = replace(state, transcript=state.transcript + (record,))
        if not state.is_terminal and state.turn_count >= self.config.max_turns:
            response = TurnResponse(
                ResponseKind.ESCALATE,
                "Turn budget exhausted; please escalate to an engineer.",
            )
            record = replace(
                record, kind="exhausted", response_text=response.text
            )
            state = replace(
                state,
                status=SessionStatus.EXHAUSTED,
                transcript=state.transcript[:-1] + (record,),
            )
        return state, response

    def _dispatch(
        self,
        state: SessionState,
        query: str,
        results: list[RetrievalResult],
        outcome: SelectionOutcome,
        *,
        input_text: str,
        cross_jump: bool = False,
        branch_index: int = -1,
        branch_token: str = "",
    ) -> tuple[SessionState, TurnResponse]:
        """Common tail of start/feedback/clarify: act on a selection."""
        top_ids = tuple(r.lu.id for r in results)
        base = TurnRecord(
            turn=state.turn_count,
            kind="",
            query=query,
            input_text=input_text,
            top_ids=top_ids,
            branch_index=branch_index,
            branch_token=branch_token,
            cross_jump=cross_jump,
        )

        if outcome.kind is OutcomeKind.NO_INFO:
            text = "No applicable guidance found. " + " ".join(outcome.explanations)
            state = replace(state, status=SessionStatus.NO_INFO)
            record = replace(base, kind="no_info", response_text=text)
            return self._finish_turn(state, TurnResponse(ResponseKind.NO_INFO, text), record)

        if outcome.kind is OutcomeKind.CLARIFY:
            state = replace(
                state,
                status=SessionStatus.AWAITING_CLARIFICATION,
                pending_phrase=outcome.unmet_phrase,
                current_lu_id=outcome.lu_ids[0],
                cached_candidates=top_ids,
                cached_query=query,
            )
            record = replace(
                base, kind="clarify", selected_id=outcome.lu_ids[0],
                response_text=outcome.question,
            )
            return self._finish_turn(
                state,
                TurnResponse(
                    ResponseKind.CLARIFY_QUESTION, outcome.question, outcome.lu_ids[0]
                ),
                record,
            )

        lu = self.kb.get(outcome.lu_ids[0])
        if lu is None:
            raise SessionError(f"selected LU vanished from snapshot: {outcome.lu_ids[0]}")
        bodies = [self._present(lu, state.ctx)]
        for extra_id in outcome.lu_ids[1:]:
            extra = self.kb.get(extra_id)
            if extra is not None:
                bodies.append(self._present(extra, state.ctx))
        text = "\n\n---\n\n".join(bodies)

        if lu.lu_type is LUType.STEP and not self.config.single_turn:
            text = f"{lu.header}\n\n{text}"
            if lu.linker:
                text += "\n\nPossible outcomes:\n" + render_linker_block(list(lu.linker))
            state = replace(
                state,
                status=SessionStatus.AWAITING_FEEDBACK,
                current_lu_id=lu.id,
                current_doc_id=lu.meta.source_doc_id,
                no_match_retries=0,
                ctx=state.ctx.with_history("system", lu.header),
            )
            record = replace(
                base, kind="step", selected_id=lu.id, response_text=text
            )
            return self._finish_turn(
                state,
                TurnResponse(ResponseKind.STEP_INSTRUCTION, text, lu.id, lu.linker),
                record,
            )

        # Plan path: linear answer, session complete.
        state = replace(
            state,
            status=SessionStatus.MITIGATED,
            current_lu_id=lu.id,
            current_doc_id=lu.meta.source_doc_id,
            ctx=state.ctx.with_history("system", lu.header),
        )
        record = replace(base, kind="plan", selected_id=lu.id, response_text=text)
        return self._finish_turn(
            state, TurnResponse(ResponseKind.PLAN, text, lu.id, lu.linker), record
        )

    # -- public operations --------------------------------------------------

    def start(
        self, question: str, session_id: str | None = None
    ) -> tuple[SessionState, TurnResponse]:
        if not question.strip():
            raise ValueError("empty question")
        ctx = SelectionContext(question=question, facts=(question,)).with_history(
            "user", question
        )
        state = SessionState(
            session_id=session_id or uuid.uuid4().hex,
            ctx=ctx,
            status=SessionStatus.ACTIVE,
            turn_count=1,
        )
        if len(self.kb) == 0:
            text = "The knowledge base is empty."
            record = TurnRecord(
                turn=1, kind="no_info", query=question, input_text=question,
                response_text=text,
            )
            state = replace(state, status=SessionStatus.NO_INFO)
            return self._finish_turn(state, TurnResponse(ResponseKind.NO_INFO, text), record)
        results = self._retrieve(question)
        if not results:
            text = "No guidance in the knowledge base matches this question."
            record = TurnRecord(
                turn=1, kind="no_info", query=question, input_text=question,
                response_text=text,
            )
            state = replace(state, status=SessionStatus.NO_INFO)
            return self._finish_turn(state, TurnResponse(ResponseKind.NO_INFO, text), record)
        outcome = self._select(results, question, ctx)
        return self._dispatch(state, question, results, outcome, input_text=question)

    def _match_branch_gateway(
        self, outcome_text: str, branches: tuple[LinkerBranch, ...]
    ) -> int | None:
        listing = "\n".join(
            f"{i}: If {b.condition}, then {b.next_intent}." for i, b in enumerate(branches)
        )
        prompt = (
            fill(BRANCH_MATCH_PROMPT, BRANCHES=listing, OUTCOME=outcome_text)
            + "\n"
            + script_tag("branch")
        )
        try:
            reply = self.gateway.complete_json(prompt)
            idx = reply.get("BRANCH_INDEX")
            if idx is None:
                return None
            idx = int(idx)
            if 0 <= idx < len(branches):
                return idx
        except (GatewayError, AttributeError, TypeError, ValueError):
            pass
        return match_branch(outcome_text, branches, self.config.branch_floor)

    def feedback(
        self, state: SessionState, outcome_text: str
    ) -> tuple[SessionState, TurnResponse]:
        """Advance past the current step using the observed outcome."""
        if state.status is not SessionStatus.AWAITING_FEEDBACK:
            raise SessionError(f"feedback not accepted in status {state.status.value}")
        if not outcome_text.strip():
            raise ValueError("empty feedback")
        lu = self.kb.get(state.current_lu_id)
        if lu is None:
            raise SessionError(f"current LU missing from snapshot: {state.current_lu_id}")

        state = replace(state, turn_count=state.turn_count + 1)
        base = TurnRecord(
            turn=state.turn_count, kind="feedback", input_text=outcome_text
        )

        if not lu.linker:
            # Terminal step: any outcome ends the session.
            text = "This step has no further branches; the session is complete."
            state = replace(
                state,
                status=SessionStatus.MITIGATED,
                ctx=state.ctx.with_completed(lu.header)
                .with_fact(outcome_text)
                .with_history("user", outcome_text),
            )
            record = replace(base, kind="mitigated", response_text=text)
            return self._finish_turn(state, TurnResponse(ResponseKind.MITIGATED, text), record)

        if self.config.use_gateway_branch_match and self.gateway is not None:
            idx = self._match_branch_gateway(outcome_text, lu.linker)
        else:
            idx = match_branch(outcome_text, lu.linker, self.config.branch_floor)

        if idx is None:
            if state.no_match_retries == 0:
                text = (
                    "That outcome does not match a known branch. Possible outcomes:\n"
                    + render_linker_block(list(lu.linker))
                    + "\nPlease restate what you observed."
                )
                state = replace(
                    state,
                    no_match_retries=1,
                    ctx=state.ctx.with_history("user", outcome_text),
                )
                record = replace(base, kind="reask", response_text=text)
                return self._finish_turn(
                    state, TurnResponse(ResponseKind.CLARIFY_QUESTION, text, lu.id, lu.linker), record
                )
            text = "Unable to interpret the outcome twice; escalating to a human engineer."
            state = replace(
                state,
                status=SessionStatus.ESCALATED,
                ctx=state.ctx.with_history("user", outcome_text),
            )
            record = replace(base, kind="escalated", response_text=text)
            return self._finish_turn(state, TurnResponse(ResponseKind.ESCALATE, text), record)

        branch = lu.linker[idx]
        ctx = (
            state.ctx.with_completed(lu.header)
            .with_fact(outcome_text)
            .with_history("user", outcome_text)
        )
        state = replace(state, ctx=ctx)
        base = replace(base, selected_id=lu.id, branch_index=idx, branch_token=branch.token)

        if branch.token == TOKEN_MITIGATE:
            text = branch.next_intent
            state = replace(state, status=SessionStatus.MITIGATED)
            record = replace(base, kind="mitigated", response_text=text)
            return self._finish_turn(state, TurnResponse(ResponseKind.MITIGATED, text), record)

        cross = branch.token == TOKEN_CROSS
        query = branch.next_intent
        doc_scope = None if cross else state.current_doc_id
        results = self._retrieve(query, doc_id=doc_scope, exclude={lu.id})
        if not results and not cross:
            # Same-guide scope exhausted; widen before giving up.
            results = self._retrieve(query, exclude={lu.id})
        if not results:
            text = f"No further guidance found for: {query}"
            state = replace(state, status=SessionStatus.NO_INFO)
            record = replace(base, kind="no_info", query=query, response_text=text)
            return self._finish_turn(state, TurnResponse(ResponseKind.NO_INFO, text), record)
        outcome = self._select(results, query, state.ctx)
        if outcome.rephrased_query:
            redo = self._retrieve(outcome.rephrased_query, exclude={lu.id})
            if redo:
                results = redo
                outcome = self._select(results, outcome.rephrased_query, state.ctx)
                query = outcome.rephrased_query or query
        return self._dispatch(
            state,
            query,
            results,
            outcome,
            input_text=outcome_text,
            cross_jump=cross,
            branch_index=idx,
            branch_token=branch.token,
        )

    def clarify(
        self, state: SessionState, answer_text: str
    ) -> tuple[SessionState, TurnResponse]:
        """Consume a clarification answer and re-run selection."""
        if state.status is not SessionStatus.AWAITING_CLARIFICATION:
            raise SessionError(f"clarification not accepted in status {state.status.value}")
        if not answer_text.strip():
            raise ValueError("empty answer")

        normalized = answer_text.strip().lower()
        if re.match(r"^(yes|yep|yeah|y|correct|i do|i have)\b", normalized):
            fact = state.pending_phrase
        elif re.match(r"^(no|nope|nah|i don't|i do not)\b", normalized):
            fact = f"not: {state.pending_phrase}"
        else:
            fact = answer_text.strip()

        ctx = state.ctx.with_fact(fact).with_history("user", answer_text)
        state = replace(
            state, ctx=ctx, turn_count=state.turn_count + 1, pending_phrase=""
        )
        results = [
            RetrievalResult(lu, 1.0)
            for lu_id in state.cached_candidates
            if (lu := self.kb.get(lu_id)) is not None
        ]
        outcome = self._select(results, state.cached_query, ctx)
        return self._dispatch(
            state, state.cached_query, results, outcome, input_text=answer_text
        )


# ---------------------------------------------------------------------------
# scripted harness


def normalize_header(text: str) -> str:
    return " ".join(re.findall(r"[a-z0-9]+", text.lower()))


def force_current_lu(state: SessionState, lu: LogicUnit) -> SessionState:
    """Harness-only correction: pin the session onto a specific step."""
    return replace(
        state,
        status=SessionStatus.AWAITING_FEEDBACK,
        current_lu_id=lu.id,
        current_doc_id=lu.meta.source_doc_id,
        no_match_retries=0,
    )


def export_transcript(state: SessionState) -> list[dict]:
    return [record.to_record() for record in state.transcript]

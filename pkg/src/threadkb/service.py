"""HTTP facade over the knowledge base and session engine.

One FastAPI app per process. The app owns a mutable "current KB"
snapshot that ingest replaces wholesale; every session pins the
snapshot that was current when it started, so a re-ingest mid-session
never moves the ground under an open conversation.

Feedback calls carry a turn nonce: the client echoes the ``turn``
value from the response it is answering. Each nonce is accepted at
most once, which makes retries after a dropped response safe.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, ConfigDict

from .gateway import ChatGateway, HashingEmbedder
from .linker import LinkerBranch, VALID_TOKENS
from .model import FormatTag, LogicUnit, SourceDocument, lu_to_record
from .pipeline import PipelineConfig, PipelineError, update_kb
from .session import (
    ResponseKind,
    SessionConfig,
    SessionEngine,
    SessionError,
    SessionState,
    SessionStatus,
    TurnResponse,
    export_transcript,
    normalize_header,
)
from .store import Embedder, KnowledgeBase, build_index, retrieve

DEFAULT_PORT = 8787
TOKEN_ENV_VAR = "THREADKB_TOKEN"
API_PREFIX = "/api/v1"

MAX_QUERY_K = 100


# ---------------------------------------------------------------------------
# request bodies


class IngestRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    doc_id: str
    text: str
    title: str = ""
    format: str = "structured"


class SessionRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    question: str


class FeedbackRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    turn: int
    text: str


# ---------------------------------------------------------------------------
# app state


@dataclass
class SessionRecord:
    """One live conversation plus the engine that owns its KB snapshot."""

    engine: SessionEngine
    state: SessionState
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class ServiceState:
    def __init__(
        self,
        kb: KnowledgeBase | None,
        gateway: ChatGateway | None,
        embedder: Embedder | None,
        session_config: SessionConfig,
        pipeline_config: PipelineConfig,
        token: str | None,
    ) -> None:
        self.kb = kb
        self.gateway = gateway
        self.embedder = embedder
        self.session_config = session_config
        self.pipeline_config = pipeline_config
        self.token = token
        self.sessions: dict[str, SessionRecord] = {}
        self.lock = threading.Lock()

    def current_kb(self) -> KnowledgeBase:
        with self.lock:
            if self.kb is None:
                self.kb = build_index([], self.embedder)
            return self.kb


# ---------------------------------------------------------------------------
# serialization helpers


def _branch_payload(branch: LinkerBranch) -> dict:
    return {
        "condition": branch.condition,
        "next_intent": branch.next_intent,
        "token": branch.token,
        "catch_all": branch.is_catch_all,
    }


def _response_payload(state: SessionState, resp: TurnResponse) -> dict:
    return {
        "session_id": state.session_id,
        "turn": state.turn_count,
        "status": state.status.value,
        "kind": resp.kind.value,
        "text": resp.text,
        "lu_id": resp.lu_id,
        "branches": [_branch_payload(b) for b in resp.branches],
    }


def _lu_summary(lu: LogicUnit, score: float | None = None) -> dict:
    payload = {
        "lu_id": lu.id,
        "header": lu.header,
        "lu_type": lu.lu_type.value,
        "doc_id": lu.meta.source_doc_id,
    }
    if score is not None:
        payload["score"] = score
    return payload


def resolve_branch_target(kb: KnowledgeBase, branch: LinkerBranch) -> str | None:
    """Map a CONTINUE/CROSS intent to the LU it lands on, or None.

    Header containment wins over retrieval so that graph edges stay
    stable even when the hash embedder has close ties.
    """
    if branch.token not in ("CONTINUE", "CROSS"):
        return None
    intent = normalize_header(branch.next_intent)
    if not intent:
        return None
    matches = [
        lu
        for lu in kb.lus
        if normalize_header(lu.header) and normalize_header(lu.header) in intent
    ]
    if matches:
        # Longest header is the most specific phrase inside the intent.
        matches.sort(key=lambda lu: (-len(normalize_header(lu.header)), lu.id))
        return matches[0].id
    hits = retrieve(kb, branch.next_intent, k=1)
    return hits[0].lu.id if hits else None


def _graph_edges(kb: KnowledgeBase, lu: LogicUnit) -> tuple[list[dict], list[dict]]:
    outgoing = []
    for i, branch in enumerate(lu.linker):
        outgoing.append(
            {
                "branch_index": i,
                "token": branch.token,
                "condition": branch.condition,
                "next_intent": branch.next_intent,
                "target_lu_id": resolve_branch_target(kb, branch),
            }
        )
    incoming = []
    for other in kb.lus:
        if other.id == lu.id:
            continue
        for i, branch in enumerate(other.linker):
            if resolve_branch_target(kb, branch) == lu.id:
                incoming.append(
                    {
                        "source_lu_id": other.id,
                        "branch_index": i,
                        "token": branch.token,
                        "condition": branch.condition,
                    }
                )
    return outgoing, incoming


# ---------------------------------------------------------------------------
# app factory


_ENDPOINT_SUMMARY = [
    {"method": "GET", "path": f"{API_PREFIX}/spec", "summary": "API contract (open)"},
    {"method": "GET", "path": f"{API_PREFIX}/health", "summary": "liveness probe (open)"},
    {"method": "POST", "path": f"{API_PREFIX}/ingest", "summary": "add or replace one document"},
    {"method": "POST", "path": f"{API_PREFIX}/sessions", "summary": "start a session from a question"},
    {
        "method": "POST",
        "path": f"{API_PREFIX}/sessions/{{session_id}}/feedback",
        "summary": "answer the pending step or clarification",
    },
    {"method": "GET", "path": f"{API_PREFIX}/sessions/{{session_id}}", "summary": "state and transcript"},
    {"method": "GET", "path": f"{API_PREFIX}/lus", "summary": "list or search logic units"},
    {"method": "GET", "path": f"{API_PREFIX}/lus/{{lu_id}}", "summary": "one logic unit with graph edges"},
]


def create_app(
    kb: KnowledgeBase | None = None,
    *,
    gateway: ChatGateway | None = None,
    embedder: Embedder | None = None,
    session_config: SessionConfig | None = None,
    pipeline_config: PipelineConfig | None = None,
    token: str | None = None,
) -> FastAPI:
    """Build the service around an optional pre-built KB snapshot.

    ``token`` defaults to the THREADKB_TOKEN environment variable; when
    neither is set the API is open. The embedder argument only matters
    when no KB is supplied (ingest builds the first snapshot with it).
    """
    if embedder is None:
        embedder = kb.embedder if kb is not None else HashingEmbedder()
    svc = ServiceState(
        kb=kb,
        gateway=gateway,
        embedder=embedder,
        session_config=session_config or SessionConfig(),
        pipeline_config=pipeline_config or PipelineConfig(),
        token=token if token is not None else os.environ.get(TOKEN_ENV_VAR) or None,
    )

    app = FastAPI(title="threadkb", docs_url=None, redoc_url=None)
    app.state.svc = svc
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def require_auth(request: Request) -> None:
        if svc.token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {svc.token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    protected = [Depends(require_auth)]

    # -- open endpoints ----------------------------------------------------

    @app.get(f"{API_PREFIX}/spec")
    def get_spec() -> dict:
        return {
            "service": "threadkb",
            "api_version": "v1",
            "auth": "bearer" if svc.token else "none",
            "endpoints": _ENDPOINT_SUMMARY,
            "session_statuses": [s.value for s in SessionStatus],
            "response_kinds": [k.value for k in ResponseKind],
            "linker_tokens": sorted(VALID_TOKENS),
        }

    @app.get(f"{API_PREFIX}/health")
    def get_health() -> dict:
        return {"status": "ok"}

    # -- ingest --------------------------------------------------------------

    @app.post(f"{API_PREFIX}/ingest", dependencies=protected)
    def post_ingest(body: IngestRequest) -> dict:
        if not body.doc_id.strip():
            raise HTTPException(status_code=400, detail="doc_id must not be empty")
        if not body.text.strip():
            raise HTTPException(status_code=400, detail="text must not be empty")
        try:
            tag = FormatTag.from_string(body.format)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        doc = SourceDocument(
            id=body.doc_id, title=body.title, raw_text=body.text, format_tag=tag
        )
        base = svc.current_kb()
        try:
            fresh = update_kb(base, doc, svc.pipeline_config, svc.gateway)
        except PipelineError as exc:
            if "requires a gateway" in str(exc):
                raise HTTPException(status_code=503, detail=str(exc)) from exc
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        with svc.lock:
            svc.kb = fresh
        lu_ids = [lu.id for lu in fresh.lus if lu.meta.source_doc_id == doc.id]
        return {"doc_id": doc.id, "lu_ids": lu_ids, "lu_count": len(lu_ids), "kb_size": len(fresh.lus)}

    # -- sessions -----------------------------------------------------------

    @app.post(f"{API_PREFIX}/sessions", status_code=201, dependencies=protected)
    def post_session(body: SessionRequest) -> dict:
        if not body.question.strip():
            raise HTTPException(status_code=400, detail="question must not be empty")
        kb_snapshot = svc.current_kb()
        if not kb_snapshot.lus:
            raise HTTPException(
                status_code=409, detail="no knowledge base loaded; ingest documents first"
            )
        engine = SessionEngine(kb_snapshot, svc.session_config, svc.gateway)
        state, resp = engine.start(body.question)
        record = SessionRecord(engine=engine, state=state)
        with svc.lock:
            svc.sessions[state.session_id] = record
        return _response_payload(state, resp)

    def _get_record(session_id: str) -> SessionRecord:
        with svc.lock:
            record = svc.sessions.get(session_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown session: {session_id}")
        return record

    @app.post(f"{API_PREFIX}/sessions/{{session_id}}/feedback", dependencies=protected)
    def post_feedback(session_id: str, body: FeedbackRequest) -> dict:
        record = _get_record(session_id)
        if not body.text.strip():
            raise HTTPException(status_code=400, detail="text must not be empty")
        with record.lock:
            state = record.state
            if state.is_terminal:
                raise HTTPException(
                    status_code=410, detail=f"session ended with status {state.status.value}"
                )
            if body.turn != state.turn_count:
                raise HTTPException(
                    status_code=409,
                    detail=(
                        f"turn {body.turn} is not open; "
                        f"the pending turn is {state.turn_count}"
                    ),
                )
            try:
                if state.status is SessionStatus.AWAITING_CLARIFICATION:
                    new_state, resp = record.engine.clarify(state, body.text)
                else:
                    new_state, resp = record.engine.feedback(state, body.text)
            except SessionError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            record.state = new_state
        return _response_payload(new_state, resp)

    @app.get(f"{API_PREFIX}/sessions/{{session_id}}", dependencies=protected)
    def get_session(session_id: str) -> dict:
        record = _get_record(session_id)
        with record.lock:
            state = record.state
            return {
                "session_id": state.session_id,
                "turn": state.turn_count,
                "status": state.status.value,
                "terminal": state.is_terminal,
                "current_lu_id": state.current_lu_id,
                "question": state.ctx.question,
                "transcript": export_transcript(state),
            }

    # -- logic units ----------------------------------------------------------

    @app.get(f"{API_PREFIX}/lus", dependencies=protected)
    def get_lus(query: str = "", k: int = 10) -> dict:
        if not 1 <= k <= MAX_QUERY_K:
            raise HTTPException(
                status_code=400, detail=f"k must be between 1 and {MAX_QUERY_K}"
            )
        kb_snapshot = svc.current_kb()
        if query.strip():
            hits = retrieve(kb_snapshot, query, k=k)
            items = [_lu_summary(hit.lu, score=hit.score) for hit in hits]
        else:
            ordered = sorted(kb_snapshot.lus, key=lambda lu: lu.id)[:k]
            items = [_lu_summary(lu) for lu in ordered]
        return {"total": len(kb_snapshot.lus), "items": items}

    @app.get(f"{API_PREFIX}/lus/{{lu_id}}", dependencies=protected)
    def get_lu(lu_id: str) -> dict:
        kb_snapshot = svc.current_kb()
        lu = kb_snapshot.get(lu_id)
        if lu is None:
            raise HTTPException(status_code=404, detail=f"unknown logic unit: {lu_id}")
        outgoing, incoming = _graph_edges(kb_snapshot, lu)
        return {"lu": lu_to_record(lu), "outgoing": outgoing, "incoming": incoming}

    return app

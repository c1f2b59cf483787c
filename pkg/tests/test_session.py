"""Session engine: branch routing, clarification, liveness, replay."""

import itertools
import json

import pytest
from hypothesis import given, settings, strategies as st

from threadkb.gateway import ChatGateway, HashingEmbedder, MockChatModel
from threadkb.linker import parse_linker_block
from threadkb.model import LUType, MetaData, make_logic_unit
from threadkb.session import (
    ResponseKind,
    SessionConfig,
    SessionEngine,
    SessionError,
    SessionState,
    SessionStatus,
    TERMINAL_STATUSES,
    export_transcript,
    force_current_lu,
    match_branch,
    normalize_header,
    substitute_placeholders,
)
from threadkb.store import build_index


def step(doc, header, body, linker="", prereq=""):
    return make_logic_unit(
        lu_type=LUType.STEP,
        meta=MetaData(source_doc_id=doc),
        header=header,
        body=body,
        prerequisite=prereq,
        linker=parse_linker_block(linker) if linker else (),
    )


LOAD = step(
    "webapp-performance",
    "Check the Web Application Server Load",
    "Open the monitor and read the load average for the web tier.",
    "If the server load is high, then Optimize the Database Queries.[CONTINUE] "
    "If the server load is normal and the traffic is low, then enable verbose tracing "
    "and collect a performance profile.[MITIGATE] "
    "Otherwise, continue monitoring the web application dashboards.[MITIGATE]",
    "The web application and server monitor are accessible.",
)
QUERIES = step(
    "webapp-performance",
    "Optimize the Database Queries",
    "Pull the slow query log and compare against the index list.",
    "If the slow query log shows heavy queries, then add the missing indexes and "
    "re-run the load test.[MITIGATE] "
    "If the database is healthy, then Inspect the Cache Hit Rate.[CONTINUE] "
    "Otherwise, escalate to the database administrator.[MITIGATE]",
)
CACHE = step(
    "webapp-performance",
    "Inspect the Cache Hit Rate",
    "Read the cache hit ratio panel for the last hour.",
)
FAILOVER = step(
    "db-failover",
    "Fail Over the Database Primary",
    "Promote the standby and repoint the connection strings.",
    "Otherwise, run the failover playbook and verify replication catches up.[MITIGATE]",
)
REPLICAS = step(
    "db-failover",
    "Verify the Search Replicas",
    "Compare replica document counts against the primary.",
    "Otherwise, replica counts match, so no action is needed.[MITIGATE]",
)
BALANCER = step(
    "network-runbook",
    "Check the Load Balancer Health",
    "Open the balancer console and inspect the backend pool states.",
    "If the backend pool is degraded, then please follow Fail Over the Database "
    "Primary.[CROSS] "
    "Otherwise, the balancer is healthy, so re-check the web application.[MITIGATE]",
)
TLS = step(
    "network-runbook",
    "Rotate the TLS Certificates",
    "Issue fresh certificates and reload the listeners.",
    "If the certificate expired, then renew it with the internal CA.[MITIGATE] "
    "If the handshake still fails, then capture a TLS debug trace.[MITIGATE]",
)
SEARCH = step(
    "search-runbook",
    "Rebuild the Search Index",
    "Kick off a full reindex from the primary store.",
    "If the index is stale, then Verify the Search Replicas.[CONTINUE] "
    "Otherwise, search is consistent, so close the ticket.[MITIGATE]",
)

CORPUS = [LOAD, QUERIES, CACHE, FAILOVER, REPLICAS, BALANCER, TLS, SEARCH]
FIG_QUESTION = (
    "How do I fix a slow web application? "
    "The web application and server monitor are accessible."
)


@pytest.fixture(scope="module")
def kb():
    return build_index(CORPUS, HashingEmbedder())


@pytest.fixture
def engine(kb):
    return SessionEngine(kb)


# ---------------------------------------------------------------------------
# helpers


def test_normalize_header():
    assert normalize_header("Check the Server Load.") == "check the server load"
    assert normalize_header("  CHECK   the\tserver load ") == "check the server load"


def test_substitute_placeholders_fact_beats_default():
    body = "run probe --cluster <CLUSTER NAME> --window <TIME>"
    out = substitute_placeholders(
        body, {"<TIME>": "30m", "<CLUSTER NAME>": "default-1"},
        ("the cluster name is prod-7",),
    )
    assert out == "run probe --cluster prod-7 --window 30m"


def test_substitute_placeholders_unresolved_stays_visible():
    body = "run probe --cluster <CLUSTER NAME>"
    assert substitute_placeholders(body, {}, ()) == body


def test_match_branch_prefers_condition_over_catch_all():
    branches = LOAD.linker
    assert match_branch("the server load is high", branches) == 0
    assert match_branch("load is normal, traffic is low", branches) == 1
    assert match_branch("purple elephants dancing", branches) == 2  # catch-all
    assert match_branch("anything", TLS.linker) is None  # no catch-all to fall to


# ---------------------------------------------------------------------------
# the guided two-hop path


def test_start_presents_top_step(engine):
    state, resp = engine.start(FIG_QUESTION, session_id="s1")
    assert state.status is SessionStatus.AWAITING_FEEDBACK
    assert resp.kind is ResponseKind.STEP_INSTRUCTION
    assert resp.lu_id == LOAD.id
    assert resp.branches == LOAD.linker
    assert LOAD.header in resp.text
    assert LOAD.body in resp.text
    assert "Possible outcomes:" in resp.text
    assert state.turn_count == 1
    assert [r.kind for r in state.transcript] == ["step"]


def test_two_feedback_turns_reach_mitigated(engine):
    state, _ = engine.start(FIG_QUESTION, session_id="s2")
    state, resp = engine.feedback(state, "the server load is high")
    assert resp.kind is ResponseKind.STEP_INSTRUCTION
    assert resp.lu_id == QUERIES.id
    assert state.current_doc_id == "webapp-performance"
    state, resp = engine.feedback(state, "the slow query log shows heavy queries")
    assert state.status is SessionStatus.MITIGATED
    assert resp.kind is ResponseKind.MITIGATED
    assert resp.text == "add the missing indexes and re-run the load test"
    assert state.turn_count == 3
    assert [r.kind for r in state.transcript] == ["step", "step", "mitigated"]
    assert state.transcript[1].branch_token == "CONTINUE"
    assert state.transcript[2].branch_token == "MITIGATE"


def test_continue_excludes_current_lu(engine):
    state, _ = engine.start(FIG_QUESTION, session_id="s3")
    state, resp = engine.feedback(state, "the server load is high")
    # Even though the intent echoes step wording, the session must move on.
    assert resp.lu_id != LOAD.id
    assert LOAD.id not in state.transcript[-1].top_ids


def test_completed_headers_accumulate(engine):
    state, _ = engine.start(FIG_QUESTION, session_id="s4")
    state, _ = engine.feedback(state, "the server load is high")
    assert state.ctx.completed_headers == (LOAD.header,)
    assert "the server load is high" in state.ctx.facts


# ---------------------------------------------------------------------------
# terminal branches and terminal steps


def test_mitigate_branch_is_terminal(engine):
    state, _ = engine.start(FIG_QUESTION, session_id="s5")
    state, resp = engine.feedback(state, "server load is normal and the traffic is low")
    assert state.status is SessionStatus.MITIGATED
    assert "verbose tracing" in resp.text
    with pytest.raises(SessionError, match="mitigated"):
        engine.feedback(state, "more input")


def test_catch_all_branch_catches_unrelated_outcome(engine):
    state, _ = engine.start(FIG_QUESTION, session_id="s6")
    state, resp = engine.feedback(state, "purple elephants dancing everywhere")
    assert state.status is SessionStatus.MITIGATED
    assert resp.text == "continue monitoring the web application dashboards"


def test_step_without_linker_ends_on_any_feedback(engine):
    state, resp = engine.start("inspect the cache hit rate", session_id="s7")
    assert resp.lu_id == CACHE.id
    assert resp.branches == ()
    state, resp = engine.feedback(state, "the ratio is fine")
    assert state.status is SessionStatus.MITIGATED
    assert resp.kind is ResponseKind.MITIGATED


# ---------------------------------------------------------------------------
# re-ask and escalation


def test_unmatched_feedback_reasks_once_then_escalates(engine):
    state, resp = engine.start("rotate the tls certificates", session_id="s8")
    assert resp.lu_id == TLS.id
    state, resp = engine.feedback(state, "purple elephants dancing")
    assert state.status is SessionStatus.AWAITING_FEEDBACK
    assert resp.kind is ResponseKind.CLARIFY_QUESTION
    assert "Possible outcomes:" in resp.text
    state, resp = engine.feedback(state, "still purple elephants")
    assert state.status is SessionStatus.ESCALATED
    assert resp.kind is ResponseKind.ESCALATE
    assert [r.kind for r in state.transcript] == ["step", "reask", "escalated"]


def test_matched_feedback_resets_reask_counter(engine):
    state, _ = engine.start("rotate the tls certificates", session_id="s9")
    state, _ = engine.feedback(state, "purple elephants dancing")
    state, resp = engine.feedback(state, "the certificate expired")
    assert state.status is SessionStatus.MITIGATED
    assert resp.text == "renew it with the internal CA"


# ---------------------------------------------------------------------------
# scope control: CROSS and widening


def test_cross_branch_jumps_documents(engine):
    state, resp = engine.start("check the load balancer health", session_id="s10")
    assert resp.lu_id == BALANCER.id
    state, resp = engine.feedback(state, "the backend pool is degraded")
    assert resp.lu_id == FAILOVER.id
    assert state.current_doc_id == "db-failover"
    assert state.transcript[-1].cross_jump is True


def test_continue_widens_when_home_doc_is_exhausted(engine):
    state, resp = engine.start("rebuild the search index", session_id="s11")
    assert resp.lu_id == SEARCH.id
    state, resp = engine.feedback(state, "the index is stale")
    assert resp.lu_id == REPLICAS.id
    assert state.current_doc_id == "db-failover"
    assert state.transcript[-1].cross_jump is False


def test_continue_with_no_target_reports_no_info(kb):
    lone = step(
        "orphan-doc",
        "Inspect the Orphan Queue",
        "look at it",
        "If the queue grows, then qqzz wwyy xxjj.[CONTINUE]",
    )
    engine = SessionEngine(build_index([lone], HashingEmbedder()))
    state, _ = engine.start("inspect the orphan queue", session_id="s12")
    state, resp = engine.feedback(state, "the queue grows")
    assert state.status is SessionStatus.NO_INFO
    assert resp.kind is ResponseKind.NO_INFO


# ---------------------------------------------------------------------------
# clarification loop


MONITOR = step(
    "server-monitor",
    "Check the Server Load",
    "Read the one-minute load average.",
    "Otherwise, watch the load for ten minutes.[MITIGATE]",
    "access to the server monitor",
)


@pytest.fixture
def clarify_engine():
    return SessionEngine(build_index([MONITOR], HashingEmbedder()))


def test_clarify_then_yes_proceeds(clarify_engine):
    state, resp = clarify_engine.start("the server is slow today", session_id="c1")
    assert state.status is SessionStatus.AWAITING_CLARIFICATION
    assert resp.kind is ResponseKind.CLARIFY_QUESTION
    assert resp.text == (
        "Before checking the server load, do you have access to the server monitor?"
    )
    state, resp = clarify_engine.clarify(state, "yes")
    assert state.status is SessionStatus.AWAITING_FEEDBACK
    assert resp.kind is ResponseKind.STEP_INSTRUCTION
    assert resp.lu_id == MONITOR.id
    assert "access to the server monitor" in state.ctx.facts
    assert state.turn_count == 2


def test_clarify_then_no_ends_with_no_info(clarify_engine):
    state, _ = clarify_engine.start("the server is slow today", session_id="c2")
    state, resp = clarify_engine.clarify(state, "no")
    assert state.status is SessionStatus.NO_INFO
    assert resp.kind is ResponseKind.NO_INFO
    assert "not: access to the server monitor" in state.ctx.facts


def test_clarify_accepts_free_text_evidence(clarify_engine):
    state, _ = clarify_engine.start("the server is slow today", session_id="c3")
    state, resp = clarify_engine.clarify(
        state, "I have access to the server monitor already"
    )
    assert state.status is SessionStatus.AWAITING_FEEDBACK
    assert resp.lu_id == MONITOR.id


def test_clarify_wrong_status_raises(engine):
    state, _ = engine.start(FIG_QUESTION, session_id="c4")
    with pytest.raises(SessionError, match="awaiting_feedback"):
        engine.clarify(state, "yes")


# ---------------------------------------------------------------------------
# input validation and terminal absorption


def test_empty_question_rejected(engine):
    with pytest.raises(ValueError, match="empty question"):
        engine.start("   ")


def test_empty_feedback_rejected(engine):
    state, _ = engine.start(FIG_QUESTION, session_id="v1")
    with pytest.raises(ValueError, match="empty feedback"):
        engine.feedback(state, " \n ")


def test_empty_kb_reports_no_info():
    engine = SessionEngine(build_index([], HashingEmbedder()))
    state, resp = engine.start("anything at all", session_id="v2")
    assert state.status is SessionStatus.NO_INFO
    assert "empty" in resp.text


def test_unrelated_question_reports_no_info(engine):
    state, resp = engine.start("qqzz wwyy xxjj", session_id="v3")
    assert state.status is SessionStatus.NO_INFO
    assert resp.kind is ResponseKind.NO_INFO


# ---------------------------------------------------------------------------
# turn budget


def test_budget_exhaustion_overrides_reask(kb):
    engine = SessionEngine(kb, SessionConfig(max_turns=2))
    state, _ = engine.start("rotate the tls certificates", session_id="b1")
    state, resp = engine.feedback(state, "purple elephants dancing")
    assert state.status is SessionStatus.EXHAUSTED
    assert resp.kind is ResponseKind.ESCALATE
    assert state.transcript[-1].kind == "exhausted"


def test_budget_of_one_exhausts_at_start(kb):
    engine = SessionEngine(kb, SessionConfig(max_turns=1))
    state, resp = engine.start(FIG_QUESTION, session_id="b2")
    assert state.status is SessionStatus.EXHAUSTED
    assert resp.kind is ResponseKind.ESCALATE


def test_bad_config_rejected():
    with pytest.raises(ValueError, match="max_turns"):
        SessionConfig(max_turns=0)
    with pytest.raises(ValueError, match="retrieve_k"):
        SessionConfig(retrieve_k=0)


# ---------------------------------------------------------------------------
# harness helpers


def test_force_current_lu_pins_step(engine):
    state, _ = engine.start(FIG_QUESTION, session_id="h1")
    forced = force_current_lu(state, CACHE)
    assert forced.current_lu_id == CACHE.id
    assert forced.current_doc_id == "webapp-performance"
    assert forced.status is SessionStatus.AWAITING_FEEDBACK
    state, resp = engine.feedback(forced, "the ratio is fine")
    assert state.status is SessionStatus.MITIGATED


def test_transcript_exports_as_json(engine):
    state, _ = engine.start(FIG_QUESTION, session_id="h2")
    state, _ = engine.feedback(state, "the server load is high")
    records = export_transcript(state)
    assert json.loads(json.dumps(records)) == records
    assert records[0]["kind"] == "step"
    assert records[1]["input_text"] == "the server load is high"
    assert all(r["turn"] == i + 1 for i, r in enumerate(records))


# ---------------------------------------------------------------------------
# gateway-assisted branch matching


def test_gateway_branch_match_routes_by_index(kb):
    reply = json.dumps({"BRANCH_INDEX": 1})
    gateway = ChatGateway(MockChatModel({"branch": reply}))
    engine = SessionEngine(
        kb, SessionConfig(use_gateway_branch_match=True), gateway=gateway
    )
    state, _ = engine.start(FIG_QUESTION, session_id="g1")
    state, resp = engine.feedback(state, "the server load is high")
    # Index 1 is the verbose-tracing MITIGATE branch, overriding lexical match.
    assert state.status is SessionStatus.MITIGATED
    assert "verbose tracing" in resp.text


def test_gateway_branch_match_falls_back_on_garbage(kb):
    gateway = ChatGateway(MockChatModel({"branch": "not json at all"}))
    engine = SessionEngine(
        kb, SessionConfig(use_gateway_branch_match=True), gateway=gateway
    )
    state, _ = engine.start(FIG_QUESTION, session_id="g2")
    state, resp = engine.feedback(state, "the server load is high")
    assert resp.lu_id == QUERIES.id


# ---------------------------------------------------------------------------
# liveness and replay


FEEDBACK_POOL = [
    "the server load is high",
    "the slow query log shows heavy queries",
    "the database is healthy",
    "the backend pool is degraded",
    "the index is stale",
    "the certificate expired",
    "yes",
    "no",
    "purple elephants dancing",
    "done",
]
QUESTION_POOL = [
    FIG_QUESTION,
    "rotate the tls certificates",
    "check the load balancer health",
    "rebuild the search index",
    "the server is slow today",
    "qqzz wwyy xxjj",
]


def drive(engine, question, feed):
    state, resp = engine.start(question, session_id="fuzz")
    states = [state]
    for text in feed:
        if state.is_terminal:
            break
        if state.status is SessionStatus.AWAITING_FEEDBACK:
            state, resp = engine.feedback(state, text)
        elif state.status is SessionStatus.AWAITING_CLARIFICATION:
            state, resp = engine.clarify(state, text)
        states.append(state)
    return state, states


@settings(max_examples=100, deadline=None)
@given(
    question=st.sampled_from(QUESTION_POOL),
    feed=st.lists(st.sampled_from(FEEDBACK_POOL), min_size=30, max_size=30),
)
def test_sessions_always_terminate_and_replay(kb, question, feed):
    engine = SessionEngine(kb)
    state, states = drive(engine, question, feed)
    # Liveness: the default budget of 20 accepted calls always lands in a
    # terminal status before the 30-entry feed runs out.
    assert state.is_terminal
    assert state.status in TERMINAL_STATUSES
    assert state.turn_count <= engine.config.max_turns
    assert len(state.transcript) == state.turn_count
    # Turn counter grows by exactly one per accepted call.
    assert [s.turn_count for s in states] == list(range(1, state.turn_count + 1))
    # Replay: a fresh engine over the same KB reproduces the run bit for bit.
    replay_state, _ = drive(SessionEngine(kb), question, feed)
    assert replay_state == state
    assert export_transcript(replay_state) == export_transcript(state)

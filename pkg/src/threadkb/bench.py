"""Scripted task harness comparing the serving paradigms on one corpus.

A task scripts one troubleshooting conversation: the opening question,
the assistant response expected at each exchange, and the outcome the
user reports back. The same task list runs against the logic-unit
session engine, top-k chunk retrieval, and whole-document retrieval,
producing EvalRecords with an identical schema so the aggregate tables
compare column for column.

A step succeeds when the expected content is covered by what was shown,
under the same judge for every paradigm. When the session engine
presents the wrong step mid-task, the harness corrects it onto the gold
step before continuing, and the correction is recorded as an
intervention on that step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .baselines import (
    ChunkConfig,
    ChunkIndex,
    DocIndex,
    DocRecord,
    build_chunk_index,
    build_doc_index,
    recursive_chunk,
    retrieve_chunks,
    retrieve_docs,
)
from .metrics import EvalRecord, StepOutcome
from .model import FormatTag, LogicUnit, MetaData
from .pipeline import extract_lus, parse_structured_doc
from .session import (
    ResponseKind,
    SessionConfig,
    SessionEngine,
    SessionStatus,
    force_current_lu,
    normalize_header,
)
from .store import KnowledgeBase
from .tokens import count_tokens, coverage

JUDGE_FLOOR = 0.8

PARADIGM_THREAD = "thread"
PARADIGM_CHUNK = "chunk"
PARADIGM_DOC = "doc"


@dataclass(frozen=True)
class TaskStep:
    expected_header: str
    outcome_text: str = ""


@dataclass(frozen=True)
class Task:
    task_id: str
    question: str
    steps: tuple[TaskStep, ...]

    def __post_init__(self) -> None:
        if not self.task_id:
            raise ValueError("task_id must be non-empty")
        if not self.question.strip():
            raise ValueError(f"{self.task_id}: empty question")
        if not self.steps:
            raise ValueError(f"{self.task_id}: a task needs at least one step")
        for i, step in enumerate(self.steps[:-1]):
            if not step.outcome_text.strip():
                raise ValueError(
                    f"{self.task_id}: step {i} needs an outcome to continue on"
                )


def tasks_from_json(obj) -> list[Task]:
    """Parse a task suite from a dict, a list, or a JSON file path."""
    if isinstance(obj, (str, Path)):
        obj = json.loads(Path(obj).read_text(encoding="utf-8"))
    if isinstance(obj, dict):
        obj = obj["tasks"]
    tasks = []
    for entry in obj:
        steps = tuple(
            TaskStep(s["expected_header"], s.get("outcome_text", ""))
            for s in entry["steps"]
        )
        tasks.append(Task(entry["task_id"], entry["question"], steps))
    return tasks


def load_corpus(corpus_dir: str | Path) -> tuple[list[DocRecord], list[LogicUnit], dict]:
    """Read a manifest-described corpus and extract its logic units."""
    corpus_dir = Path(corpus_dir)
    manifest = json.loads((corpus_dir / "manifest.json").read_text(encoding="utf-8"))
    docs: list[DocRecord] = []
    lus: list[LogicUnit] = []
    for entry in manifest["docs"]:
        text = (corpus_dir / entry["file"]).read_text(encoding="utf-8")
        docs.append(DocRecord(entry["doc_id"], entry["title"], text))
        meta = MetaData(
            source_doc_id=entry["doc_id"],
            title=entry["title"],
            format_tag=FormatTag.STRUCTURED,
        )
        lus.extend(extract_lus(parse_structured_doc(text, meta)))
    return docs, lus, manifest


def judge(expected: str, context: str, floor: float = JUDGE_FLOOR) -> bool:
    """Whether the expected content is covered by the presented context."""
    return coverage(expected, context) >= floor


def _gold_lu(kb: KnowledgeBase, header: str) -> LogicUnit | None:
    want = normalize_header(header)
    for lu in kb.lus:
        if normalize_header(lu.header) == want:
            return lu
    return None


# ---------------------------------------------------------------------------
# paradigm runners


def run_task_thread(engine: SessionEngine, task: Task) -> EvalRecord:
    """Drive one task through the session engine.

    Clarification questions are answered "yes" so prerequisite checks
    never stall a scripted run. Only step and plan responses count
    toward retrieved tokens; clarifications and closing advice do not.
    """
    state, resp = engine.start(task.question)
    outcomes: list[StepOutcome] = []
    presented: list[str] = []
    tokens = 0
    for i, step in enumerate(task.steps):
        while state.status is SessionStatus.AWAITING_CLARIFICATION:
            state, resp = engine.clarify(state, "yes")
        if resp.kind in (ResponseKind.PLAN, ResponseKind.STEP_INSTRUCTION):
            tokens += count_tokens(resp.text)
            lu = engine.kb.get(resp.lu_id)
            if lu is not None:
                presented.append(lu.header)
        elif resp.kind is ResponseKind.MITIGATED:
            presented.append(resp.text)
        success = judge(step.expected_header, resp.text)
        intervention = False
        if i + 1 < len(task.steps):
            if not success or state.status is not SessionStatus.AWAITING_FEEDBACK:
                gold = _gold_lu(engine.kb, step.expected_header)
                if gold is not None:
                    state = force_current_lu(state, gold)
                    intervention = True
            if state.status is SessionStatus.AWAITING_FEEDBACK:
                state, resp = engine.feedback(state, step.outcome_text)
        outcomes.append(StepOutcome(success, intervention))
    return EvalRecord(
        task_id=task.task_id,
        paradigm=PARADIGM_THREAD,
        steps=tuple(outcomes),
        turns=max(state.turn_count - 1, 0),
        final_status=state.status.value,
        retrieved_tokens=tokens,
        generated_items=tuple(presented),
        gold_items=tuple(s.expected_header for s in task.steps),
    )


def _run_task_retrieval(
    task: Task, paradigm: str, fetch_context
) -> EvalRecord:
    # Shared loop for the flat baselines: one retrieval per exchange,
    # query grows with each reported outcome.
    outcomes: list[StepOutcome] = []
    tokens = 0
    parts = [task.question]
    for step in task.steps:
        context = fetch_context(" ".join(parts))
        tokens += count_tokens(context)
        outcomes.append(StepOutcome(judge(step.expected_header, context)))
        if step.outcome_text.strip():
            parts.append(step.outcome_text)
    all_ok = all(o.success for o in outcomes)
    return EvalRecord(
        task_id=task.task_id,
        paradigm=paradigm,
        steps=tuple(outcomes),
        turns=max(len(task.steps) - 1, 0),
        final_status="mitigated" if all_ok else "escalated",
        retrieved_tokens=tokens,
    )


def run_task_chunk(index: ChunkIndex, task: Task, k: int = 5) -> EvalRecord:
    def fetch(query: str) -> str:
        results = retrieve_chunks(index, query, k=k)
        return "\n\n".join(r.chunk.text for r in results)

    return _run_task_retrieval(task, PARADIGM_CHUNK, fetch)


def run_task_doc(index: DocIndex, task: Task) -> EvalRecord:
    def fetch(query: str) -> str:
        results = retrieve_docs(index, query, k=1)
        if not results:
            return ""
        doc = results[0].doc
        return f"{doc.title}\n{doc.text}"

    return _run_task_retrieval(task, PARADIGM_DOC, fetch)


# ---------------------------------------------------------------------------
# suite


def run_suite(
    tasks: list[Task],
    kb: KnowledgeBase,
    docs: list[DocRecord],
    *,
    session_config: SessionConfig | None = None,
    chunk_config: ChunkConfig | None = None,
    chunk_top_k: int = 5,
) -> dict[str, list[EvalRecord]]:
    """Run every task under every paradigm over one corpus snapshot."""
    engine = SessionEngine(kb, session_config or SessionConfig())
    chunk_config = chunk_config or ChunkConfig()
    chunks = [
        chunk
        for doc in docs
        for chunk in recursive_chunk(doc.doc_id, doc.text, chunk_config)
    ]
    chunk_index = build_chunk_index(chunks, kb.embedder)
    doc_index = build_doc_index(docs, kb.embedder)
    return {
        PARADIGM_THREAD: [run_task_thread(engine, t) for t in tasks],
        PARADIGM_CHUNK: [run_task_chunk(chunk_index, t, chunk_top_k) for t in tasks],
        PARADIGM_DOC: [run_task_doc(doc_index, t) for t in tasks],
    }

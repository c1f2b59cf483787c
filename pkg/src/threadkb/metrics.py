"""Evaluation records and the aggregate quality metrics computed from them.

One EvalRecord captures one scripted task run under one paradigm, with
the same schema for every paradigm so result tables line up column for
column. Aggregation is micro: step-level rates pool all steps across
tasks, and item precision/recall pools matched items across tasks.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .tokens import tokenize

ITEM_MATCH_FLOOR = 0.5

RECORD_SCHEMA = "threadkb-eval"
RECORD_VERSION = 1


@dataclass(frozen=True)
class StepOutcome:
    success: bool
    intervention: bool = False


@dataclass(frozen=True)
class EvalRecord:
    """One task run: per-step outcomes plus session-level accounting."""

    task_id: str
    paradigm: str
    steps: tuple[StepOutcome, ...]
    turns: int
    final_status: str
    retrieved_tokens: int
    generated_items: tuple[str, ...] = ()
    gold_items: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.task_id:
            raise ValueError("task_id must be non-empty")
        if not self.paradigm:
            raise ValueError("paradigm must be non-empty")
        if self.turns < 0:
            raise ValueError(f"turns must be >= 0: {self.turns}")
        if self.retrieved_tokens < 0:
            raise ValueError(f"retrieved_tokens must be >= 0: {self.retrieved_tokens}")


@dataclass(frozen=True)
class MetricsReport:
    paradigm: str
    n_tasks: int
    n_steps: int
    sr: float
    step_sr: float
    pf_step_sr: float
    intervention_rate: float
    mean_turns: float
    mean_retrieved_tokens: float
    retrieved_tokens_per_turn: float
    precision: float
    recall: float
    f1: float


def prefix_successes(steps: tuple[StepOutcome, ...]) -> int:
    """Length of the success run before the first failure."""
    count = 0
    for step in steps:
        if not step.success:
            break
        count += 1
    return count


def _plain_jaccard(a: str, b: str) -> float:
    # Items are short phrases; stopwords carry signal here, so no filtering.
    ta, tb = set(tokenize(a)), set(tokenize(b))
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def match_items(
    generated: tuple[str, ...],
    gold: tuple[str, ...],
    threshold: float = ITEM_MATCH_FLOOR,
) -> int:
    """Size of a maximum one-to-one matching between item lists.

    Edges connect pairs whose plain-token Jaccard reaches the threshold;
    each generated item can match at most one gold item and vice versa.
    """
    if not generated or not gold:
        return 0
    rows: list[int] = []
    cols: list[int] = []
    for i, g in enumerate(generated):
        for j, h in enumerate(gold):
            if _plain_jaccard(g, h) >= threshold:
                rows.append(i)
                cols.append(j)
    if not rows:
        return 0
    graph = csr_matrix(
        (np.ones(len(rows), dtype=np.int8), (rows, cols)),
        shape=(len(generated), len(gold)),
    )
    matching = maximum_bipartite_matching(graph, perm_type="column")
    return int((matching != -1).sum())


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def compute_metrics(records: list[EvalRecord]) -> MetricsReport:
    """Micro-aggregated metrics over one paradigm's records."""
    if not records:
        raise ValueError("no records to aggregate")
    paradigms = {r.paradigm for r in records}
    if len(paradigms) > 1:
        raise ValueError(f"mixed paradigms in one aggregate: {sorted(paradigms)}")

    n_tasks = len(records)
    n_steps = sum(len(r.steps) for r in records)
    successes = sum(sum(1 for s in r.steps if s.success) for r in records)
    prefix = sum(prefix_successes(r.steps) for r in records)
    interventions = sum(sum(1 for s in r.steps if s.intervention) for r in records)
    full = sum(1 for r in records if r.steps and all(s.success for s in r.steps))
    total_turns = sum(r.turns for r in records)
    total_tokens = sum(r.retrieved_tokens for r in records)

    matched = sum(match_items(r.generated_items, r.gold_items) for r in records)
    n_generated = sum(len(r.generated_items) for r in records)
    n_gold = sum(len(r.gold_items) for r in records)
    precision = matched / n_generated if n_generated else 0.0
    recall = matched / n_gold if n_gold else 0.0

    return MetricsReport(
        paradigm=records[0].paradigm,
        n_tasks=n_tasks,
        n_steps=n_steps,
        sr=full / n_tasks,
        step_sr=successes / n_steps if n_steps else 0.0,
        pf_step_sr=prefix / n_steps if n_steps else 0.0,
        intervention_rate=interventions / n_steps if n_steps else 0.0,
        mean_turns=total_turns / n_tasks,
        mean_retrieved_tokens=total_tokens / n_tasks,
        retrieved_tokens_per_turn=total_tokens / total_turns if total_turns else 0.0,
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
    )


# ---------------------------------------------------------------------------
# serialization


def record_to_json(record: EvalRecord) -> dict:
    obj = asdict(record)
    obj["schema"] = RECORD_SCHEMA
    obj["version"] = RECORD_VERSION
    obj["steps"] = [
        {"success": s.success, "intervention": s.intervention} for s in record.steps
    ]
    obj["generated_items"] = list(record.generated_items)
    obj["gold_items"] = list(record.gold_items)
    return obj


def record_from_json(obj: dict) -> EvalRecord:
    if obj.get("schema", RECORD_SCHEMA) != RECORD_SCHEMA:
        raise ValueError(f"unknown record schema: {obj.get('schema')!r}")
    return EvalRecord(
        task_id=obj["task_id"],
        paradigm=obj["paradigm"],
        steps=tuple(
            StepOutcome(bool(s["success"]), bool(s.get("intervention", False)))
            for s in obj["steps"]
        ),
        turns=int(obj["turns"]),
        final_status=obj["final_status"],
        retrieved_tokens=int(obj["retrieved_tokens"]),
        generated_items=tuple(obj.get("generated_items", ())),
        gold_items=tuple(obj.get("gold_items", ())),
    )


def write_records(records: list[EvalRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_json(record), ensure_ascii=False) + "\n")


def read_records(path: str | Path) -> list[EvalRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(record_from_json(json.loads(line)))
    return records


# ---------------------------------------------------------------------------
# report rendering


_REPORT_COLUMNS = (
    ("tasks", "n_tasks", "{:d}"),
    ("steps", "n_steps", "{:d}"),
    ("sr", "sr", "{:.3f}"),
    ("step_sr", "step_sr", "{:.3f}"),
    ("pf_step_sr", "pf_step_sr", "{:.3f}"),
    ("hi", "intervention_rate", "{:.3f}"),
    ("turns", "mean_turns", "{:.2f}"),
    ("tok/task", "mean_retrieved_tokens", "{:.1f}"),
    ("tok/turn", "retrieved_tokens_per_turn", "{:.1f}"),
    ("precision", "precision", "{:.3f}"),
    ("recall", "recall", "{:.3f}"),
    ("f1", "f1", "{:.3f}"),
)


def report_rows(reports: list[MetricsReport]) -> list[dict]:
    return [asdict(report) for report in reports]


def render_report(reports: list[MetricsReport]) -> str:
    """Fixed-width comparison table, one row per paradigm."""
    header = ["paradigm"] + [name for name, _, _ in _REPORT_COLUMNS]
    rows = [
        [report.paradigm]
        + [fmt.format(getattr(report, attr)) for _, attr, fmt in _REPORT_COLUMNS]
        for report in reports
    ]
    widths = [
        max(len(header[i]), *(len(row[i]) for row in rows)) if rows else len(header[i])
        for i in range(len(header))
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)

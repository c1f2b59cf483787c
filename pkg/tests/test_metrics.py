import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from threadkb.metrics import (
    EvalRecord,
    StepOutcome,
    compute_metrics,
    match_items,
    prefix_successes,
    read_records,
    record_from_json,
    record_to_json,
    render_report,
    report_rows,
    write_records,
)
from threadkb.tokens import tokenize


def record(steps, *, task_id="t1", paradigm="thread", turns=None, tokens=120,
           generated=(), gold=()):
    outcomes = tuple(StepOutcome(s, i) for s, i in steps)
    return EvalRecord(
        task_id=task_id,
        paradigm=paradigm,
        steps=outcomes,
        turns=len(outcomes) if turns is None else turns,
        final_status="mitigated",
        retrieved_tokens=tokens,
        generated_items=tuple(generated),
        gold_items=tuple(gold),
    )


# ---------------------------------------------------------------------------
# step-level rates


def test_prefix_successes_stops_at_first_failure():
    steps = tuple(StepOutcome(s) for s in (True, True, False, True))
    assert prefix_successes(steps) == 2


def test_step_rates_on_ssfs():
    # [S, S, F, S]: 3 of 4 succeed, prefix run is 2.
    report = compute_metrics([record([(True, False), (True, False),
                                      (False, False), (True, False)])])
    assert report.step_sr == pytest.approx(0.75, abs=1e-9)
    assert report.pf_step_sr == pytest.approx(0.50, abs=1e-9)
    assert report.sr == 0.0


def test_sr_requires_every_step():
    full = record([(True, False)] * 3)
    partial = record([(True, False), (False, False)], task_id="t2")
    report = compute_metrics([full, partial])
    assert report.sr == pytest.approx(0.5)
    assert report.n_tasks == 2
    assert report.n_steps == 5


def test_intervention_rate_pools_steps():
    a = record([(True, True), (True, False)])
    b = record([(True, False), (False, True)], task_id="t2")
    report = compute_metrics([a, b])
    assert report.intervention_rate == pytest.approx(2 / 4)


def test_turn_and_token_accounting():
    a = record([(True, False)], turns=3, tokens=300)
    b = record([(True, False)], task_id="t2", turns=1, tokens=100)
    report = compute_metrics([a, b])
    assert report.mean_turns == pytest.approx(2.0)
    assert report.mean_retrieved_tokens == pytest.approx(200.0)
    assert report.retrieved_tokens_per_turn == pytest.approx(400 / 4)


def test_zero_turns_guard():
    report = compute_metrics([record([(True, False)], turns=0)])
    assert report.retrieved_tokens_per_turn == 0.0


# ---------------------------------------------------------------------------
# item matching


GOLD_ITEMS = (
    "check the server load",
    "restart the ingest service",
    "rotate the tls certificates",
    "verify the cluster health",
    "flush the dns cache",
)
GENERATED_ITEMS = (
    "check server load",
    "restart ingest service",
    "rotate the tls certificates",
    "purge all backups",
)


def test_match_items_counts_one_to_one():
    assert match_items(GENERATED_ITEMS, GOLD_ITEMS) == 3


def test_match_items_never_reuses_a_gold_item():
    # Both candidates hit the same gold item; only one may claim it.
    generated = ("check the server load", "check server load")
    assert match_items(generated, ("check the server load",)) == 1


def test_match_items_empty_sides():
    assert match_items((), GOLD_ITEMS) == 0
    assert match_items(GENERATED_ITEMS, ()) == 0


def test_match_items_below_threshold():
    assert match_items(("purge all backups",), GOLD_ITEMS) == 0


def test_precision_recall_f1_example():
    report = compute_metrics([record([(True, False)],
                                     generated=GENERATED_ITEMS, gold=GOLD_ITEMS)])
    assert report.precision == pytest.approx(0.75, abs=5e-5)
    assert report.recall == pytest.approx(0.60, abs=5e-5)
    assert report.f1 == pytest.approx(0.6667, abs=5e-5)


def test_f1_zero_when_nothing_matches():
    report = compute_metrics([record([(True, False)],
                                     generated=("purge all backups",),
                                     gold=("flush the dns cache",))])
    assert report.precision == 0.0
    assert report.recall == 0.0
    assert report.f1 == 0.0


# ---------------------------------------------------------------------------
# randomized oracle


def _plain_jaccard(a, b):
    ta, tb = set(tokenize(a)), set(tokenize(b))
    return len(ta & tb) / len(ta | tb) if ta and tb else 0.0


def _brute_force_matching(generated, gold):
    # Exhaustive maximum matching; item lists in the oracle stay small.
    small, large = sorted((tuple(generated), tuple(gold)), key=len)
    if not small:
        return 0
    edges = {
        (i, j)
        for i, a in enumerate(small)
        for j, b in enumerate(large)
        if _plain_jaccard(a, b) >= 0.5
    }
    best = 0
    for perm in itertools.permutations(range(len(large)), len(small)):
        best = max(best, sum((i, j) in edges for i, j in enumerate(perm)))
    return best


PHRASE_POOL = (
    "check the server load",
    "check server load now",
    "restart the ingest service",
    "restart ingest service",
    "rotate the tls certificates",
    "verify the cluster health",
    "flush the dns cache",
    "drain the task queue",
    "rebuild the search index",
    "inspect the cache hit rate",
)


def _random_records(seed, count):
    rng = random.Random(seed)
    records = []
    for i in range(count):
        steps = [
            (rng.random() < 0.7, rng.random() < 0.2)
            for _ in range(rng.randint(1, 6))
        ]
        generated = tuple(rng.sample(PHRASE_POOL, rng.randint(0, 4)))
        gold = tuple(rng.sample(PHRASE_POOL, rng.randint(1, 4)))
        records.append(record(
            steps,
            task_id=f"task-{i:03d}",
            turns=len(steps) + rng.randint(0, 3),
            tokens=rng.randint(50, 400),
            generated=generated,
            gold=gold,
        ))
    return records


def test_fifty_record_oracle():
    records = _random_records(20260819, 50)
    report = compute_metrics(records)

    n_steps = sum(len(r.steps) for r in records)
    successes = sum(s.success for r in records for s in r.steps)
    prefix = sum(prefix_successes(r.steps) for r in records)
    interventions = sum(s.intervention for r in records for s in r.steps)
    full = sum(all(s.success for s in r.steps) for r in records)
    turns = sum(r.turns for r in records)
    tokens = sum(r.retrieved_tokens for r in records)
    matched = sum(_brute_force_matching(r.generated_items, r.gold_items)
                  for r in records)
    n_generated = sum(len(r.generated_items) for r in records)
    n_gold = sum(len(r.gold_items) for r in records)
    precision = matched / n_generated
    recall = matched / n_gold

    assert report.n_tasks == 50
    assert report.n_steps == n_steps
    assert report.sr == pytest.approx(full / 50, abs=1e-9)
    assert report.step_sr == pytest.approx(successes / n_steps, abs=1e-9)
    assert report.pf_step_sr == pytest.approx(prefix / n_steps, abs=1e-9)
    assert report.intervention_rate == pytest.approx(interventions / n_steps, abs=1e-9)
    assert report.mean_turns == pytest.approx(turns / 50, abs=1e-9)
    assert report.mean_retrieved_tokens == pytest.approx(tokens / 50, abs=1e-9)
    assert report.retrieved_tokens_per_turn == pytest.approx(tokens / turns, abs=1e-9)
    assert report.precision == pytest.approx(precision, abs=1e-9)
    assert report.recall == pytest.approx(recall, abs=1e-9)
    assert report.f1 == pytest.approx(
        2 * precision * recall / (precision + recall), abs=1e-9)


def test_record_order_is_irrelevant():
    records = _random_records(7, 20)
    assert compute_metrics(records) == compute_metrics(records[::-1])


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=8))
def test_prefix_rate_never_exceeds_step_rate(steps):
    report = compute_metrics([record(steps)])
    assert 0.0 <= report.pf_step_sr <= report.step_sr <= 1.0


# ---------------------------------------------------------------------------
# validation and serialization


def test_rejects_empty_record_list():
    with pytest.raises(ValueError, match="no records"):
        compute_metrics([])


def test_rejects_mixed_paradigms():
    a = record([(True, False)])
    b = record([(True, False)], task_id="t2", paradigm="chunk")
    with pytest.raises(ValueError, match="mixed paradigms"):
        compute_metrics([a, b])


@pytest.mark.parametrize("field,value,message", [
    ("task_id", "", "task_id"),
    ("paradigm", "", "paradigm"),
    ("turns", -1, "turns"),
    ("retrieved_tokens", -5, "retrieved_tokens"),
])
def test_record_validation(field, value, message):
    kwargs = dict(
        task_id="t1", paradigm="thread", steps=(StepOutcome(True),),
        turns=2, final_status="mitigated", retrieved_tokens=10,
    )
    kwargs[field] = value
    with pytest.raises(ValueError, match=message):
        EvalRecord(**kwargs)


def test_record_json_round_trip():
    original = record([(True, True), (False, False)], turns=5, tokens=77,
                      generated=("a b c",), gold=("a b c", "d e f"))
    assert record_from_json(record_to_json(original)) == original


def test_jsonl_round_trip(tmp_path):
    records = _random_records(3, 10)
    path = tmp_path / "records.jsonl"
    write_records(records, path)
    assert read_records(path) == records


def test_unknown_schema_rejected():
    obj = record_to_json(record([(True, False)]))
    obj["schema"] = "something-else"
    with pytest.raises(ValueError, match="schema"):
        record_from_json(obj)


# ---------------------------------------------------------------------------
# report rendering


def test_render_report_lists_each_paradigm():
    thread = compute_metrics(_random_records(1, 5))
    chunk_records = [
        EvalRecord(
            task_id=r.task_id, paradigm="chunk", steps=r.steps, turns=r.turns,
            final_status=r.final_status, retrieved_tokens=r.retrieved_tokens,
            generated_items=r.generated_items, gold_items=r.gold_items,
        )
        for r in _random_records(2, 5)
    ]
    chunk = compute_metrics(chunk_records)
    text = render_report([thread, chunk])
    lines = text.splitlines()
    assert lines[0].startswith("paradigm")
    assert "pf_step_sr" in lines[0]
    assert lines[2].startswith("thread")
    assert lines[3].startswith("chunk")


def test_report_rows_are_json_ready():
    rows = report_rows([compute_metrics(_random_records(1, 5))])
    assert rows[0]["paradigm"] == "thread"
    assert set(rows[0]) > {"sr", "step_sr", "pf_step_sr", "f1"}

#!/usr/bin/env python3
"""Chunk budget sweep for the fixed-size baseline.

Bigger chunks raise the odds that the right instruction lands in
context, but every turn then pays for the extra tokens. This sweep
makes that trade visible next to the structured paradigm, whose
per-turn cost does not grow with the corpus.

    python3 scripts/sweep_chunk_size.py --corpus data/synthetic_tsgs
"""

from __future__ import annotations

import argparse
from pathlib import Path

from threadkb.baselines import ChunkConfig, build_chunk_index, recursive_chunk
from threadkb.bench import load_corpus, run_task_chunk, run_task_thread, tasks_from_json
from threadkb.gateway import HashingEmbedder
from threadkb.metrics import compute_metrics
from threadkb.session import SessionEngine
from threadkb.store import build_index

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_SIZES = (80, 140, 250, 500, 1000)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", type=Path, default=REPO_ROOT / "data" / "synthetic_tsgs")
    parser.add_argument("--sizes", type=int, nargs="+", default=list(DEFAULT_SIZES))
    parser.add_argument("--top-k", type=int, default=5)
    args = parser.parse_args()

    docs, lus, _ = load_corpus(args.corpus)
    tasks = tasks_from_json(args.corpus / "tasks.json")
    embedder = HashingEmbedder()
    kb = build_index(lus, embedder)

    header = f"{'config':>18}  {'chunks':>6}  {'step_sr':>7}  {'pf_step_sr':>10}  {'tok/turn':>8}"
    print(header)
    print("-" * len(header))
    for size in args.sizes:
        config = ChunkConfig(chunk_size=size, overlap=size // 10)
        chunks = [
            chunk
            for doc in docs
            for chunk in recursive_chunk(doc.doc_id, doc.text, config)
        ]
        index = build_chunk_index(chunks, embedder)
        records = [run_task_chunk(index, task, k=args.top_k) for task in tasks]
        report = compute_metrics(records)
        label = f"chunk {size}/{config.overlap}"
        print(
            f"{label:>18}  {len(index.chunks):>6}  {report.step_sr:>7.3f}  "
            f"{report.pf_step_sr:>10.3f}  {report.retrieved_tokens_per_turn:>8.1f}"
        )

    engine = SessionEngine(kb)
    records = [run_task_thread(engine, task) for task in tasks]
    report = compute_metrics(records)
    print(
        f"{'thread':>18}  {len(kb.lus):>6}  {report.step_sr:>7.3f}  "
        f"{report.pf_step_sr:>10.3f}  {report.retrieved_tokens_per_turn:>8.1f}"
    )


if __name__ == "__main__":
    main()

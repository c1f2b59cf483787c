#!/usr/bin/env python3
"""Compare the three retrieval paradigms on a task suite.

Runs the structured knowledge base, the chunk baseline, and the
whole-document baseline over the same corpus and tasks, writes one
record file per paradigm, and prints the aggregate table.

    python3 scripts/run_benchmark.py --corpus data/synthetic_tsgs --out-dir results
"""

from __future__ import annotations

import argparse
from pathlib import Path

from threadkb.baselines import ChunkConfig
from threadkb.bench import load_corpus, run_suite, tasks_from_json
from threadkb.gateway import HashingEmbedder
from threadkb.metrics import compute_metrics, render_report, write_records
from threadkb.store import build_index

REPO_ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", type=Path, default=REPO_ROOT / "data" / "synthetic_tsgs")
    parser.add_argument("--tasks", type=Path, default=None, help="defaults to CORPUS/tasks.json")
    parser.add_argument("--out-dir", type=Path, default=REPO_ROOT / "results")
    parser.add_argument("--chunk-size", type=int, default=None, help="override the manifest profile")
    parser.add_argument("--overlap", type=int, default=None)
    parser.add_argument("--chunk-top-k", type=int, default=5)
    args = parser.parse_args()

    docs, lus, manifest = load_corpus(args.corpus)
    tasks = tasks_from_json(args.tasks or args.corpus / "tasks.json")
    profile = manifest.get("chunk_profile", {})
    chunk_config = ChunkConfig(
        chunk_size=args.chunk_size or profile.get("chunk_size", 1000),
        overlap=args.overlap if args.overlap is not None else profile.get("overlap", 50),
    )
    kb = build_index(lus, HashingEmbedder())
    print(f"corpus: {len(docs)} docs, {len(lus)} logic units, {len(tasks)} tasks")
    print(f"chunk profile: size {chunk_config.chunk_size}, overlap {chunk_config.overlap}\n")

    results = run_suite(
        tasks, kb, docs, chunk_config=chunk_config, chunk_top_k=args.chunk_top_k
    )
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for paradigm, records in results.items():
        write_records(records, args.out_dir / f"records_{paradigm}.jsonl")
    print(render_report([compute_metrics(records) for records in results.values()]))
    print(f"\nrecords written to {args.out_dir}/")


if __name__ == "__main__":
    main()

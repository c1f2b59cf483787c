"""Command line front end.

Configuration precedence is flags, then the TOML file named by
--config or THREADKB_CONFIG, then built-in defaults. Exit codes: 0 on
success, 1 on operational failures (bad input data, nothing found),
2 on usage errors.
"""

from __future__ import annotations

import json
import os
import sys
from collections import Counter
from pathlib import Path

import click

try:
    import tomllib
except ImportError:  # py3.10
    import tomli as tomllib

from .baselines import ChunkConfig, recursive_chunk
from .bench import load_corpus, run_suite, tasks_from_json
from .gateway import HashingEmbedder
from .metrics import compute_metrics, read_records, render_report, report_rows, write_records
from .model import (
    FormatTag,
    LuImportError,
    SourceDocument,
    read_lu_file,
    validate_lu,
    write_lu_file,
)
from .pipeline import PipelineConfig, PipelineError, ingest_document
from .session import SessionConfig, SessionEngine, SessionStatus, export_transcript
from .store import build_index, retrieve

CONFIG_ENV_VAR = "THREADKB_CONFIG"


def _load_config(path: str | None) -> dict:
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise click.ClickException(f"cannot read config {path}: {exc}")


def _cfg(config: dict, section: str, key: str, flag, default):
    """Flag wins, then the config file, then the default."""
    if flag is not None:
        return flag
    value = config.get(section, {}).get(key)
    return default if value is None else value


def _load_kb(kb_path: str):
    try:
        lus = read_lu_file(kb_path)
    except (OSError, LuImportError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot load {kb_path}: {exc}")
    return build_index(lus, HashingEmbedder())


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


config_option = click.option(
    "--config", "config_path", type=click.Path(), default=None,
    help=f"TOML config file (default: ${CONFIG_ENV_VAR}).",
)
json_option = click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of text.")


@click.group()
def main() -> None:
    """Logic-unit knowledge bases for multi-turn how-to answers."""


# ---------------------------------------------------------------------------
# building knowledge bases


@main.command()
@click.argument("doc", type=click.Path(exists=True, dir_okay=False))
@click.option("--doc-id", default=None, help="Document id (default: file stem).")
@click.option("--title", default="", help="Document title (default: first heading).")
@click.option(
    "--format", "format_tag", default="structured",
    type=click.Choice([t.value for t in FormatTag]),
)
@click.option("--out", "out_path", required=True, type=click.Path(), help="LU file to write.")
@json_option
def ingest(doc: str, doc_id: str | None, title: str, format_tag: str, out_path: str, as_json: bool) -> None:
    """Extract logic units from one document into an LU file.

    When the output file already exists, units from the same document
    id are replaced and everything else is kept.
    """
    source = SourceDocument(
        id=doc_id or Path(doc).stem,
        title=title,
        raw_text=Path(doc).read_text(encoding="utf-8"),
        format_tag=FormatTag.from_string(format_tag),
    )
    try:
        fresh = ingest_document(source, PipelineConfig())
    except PipelineError as exc:
        raise click.ClickException(str(exc))
    existing = read_lu_file(out_path) if Path(out_path).exists() else []
    kept = [lu for lu in existing if lu.meta.source_doc_id != source.id]
    write_lu_file(kept + fresh, out_path)
    if as_json:
        _echo_json({"doc_id": source.id, "lu_ids": [lu.id for lu in fresh], "kb_size": len(kept) + len(fresh)})
    else:
        click.echo(f"{source.id}: {len(fresh)} logic units ({len(kept) + len(fresh)} total)")


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(), help="LU file to write.")
@json_option
def build(corpus_dir: str, out_path: str, as_json: bool) -> None:
    """Extract every document listed in CORPUS_DIR/manifest.json."""
    try:
        _, lus, manifest = load_corpus(corpus_dir)
    except (OSError, KeyError, PipelineError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot build from {corpus_dir}: {exc}")
    write_lu_file(lus, out_path)
    by_doc = Counter(lu.meta.source_doc_id for lu in lus)
    if as_json:
        _echo_json({"corpus": manifest.get("corpus", ""), "lu_count": len(lus), "by_doc": dict(by_doc)})
    else:
        click.echo(f"{len(lus)} logic units from {len(by_doc)} documents -> {out_path}")


# ---------------------------------------------------------------------------
# inspection


@main.command()
@click.argument("text")
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-k", "top_k", default=5, show_default=True, help="Results to return.")
@json_option
def query(text: str, kb_path: str, top_k: int, as_json: bool) -> None:
    """Rank logic units against TEXT by header similarity."""
    kb = _load_kb(kb_path)
    if not kb.lus:
        raise click.ClickException("knowledge base is empty")
    hits = retrieve(kb, text, k=top_k)
    if as_json:
        _echo_json([
            {"lu_id": h.lu.id, "score": h.score, "header": h.lu.header} for h in hits
        ])
        return
    for hit in hits:
        click.echo(f"{hit.score:6.4f}  {hit.lu.id}  {hit.lu.header}")


@main.command()
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True, dir_okay=False))
@json_option
def stats(kb_path: str, as_json: bool) -> None:
    """Counts by type, document, and linker token, plus validity."""
    kb = _load_kb(kb_path)
    by_type = Counter(lu.lu_type.value for lu in kb.lus)
    by_doc = Counter(lu.meta.source_doc_id for lu in kb.lus)
    tokens = Counter(b.token for lu in kb.lus for b in lu.linker)
    invalid = sum(1 for lu in kb.lus if validate_lu(lu).errors)
    payload = {
        "lu_count": len(kb.lus),
        "by_type": dict(sorted(by_type.items())),
        "by_doc": dict(sorted(by_doc.items())),
        "linker_tokens": dict(sorted(tokens.items())),
        "invalid": invalid,
        "embedder": kb.embedder_id,
    }
    if as_json:
        _echo_json(payload)
        return
    click.echo(f"logic units: {payload['lu_count']} ({invalid} invalid), embedder {kb.embedder_id}")
    for label, counts in (("type", by_type), ("doc", by_doc), ("token", tokens)):
        parts = ", ".join(f"{name}={n}" for name, n in sorted(counts.items()))
        click.echo(f"  by {label}: {parts}")


@main.command()
@click.argument("kb_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option(
    "--dialect", default="paper", show_default=True,
    type=click.Choice(["normalized", "paper"]),
)
def export(kb_file: str, out_path: str, dialect: str) -> None:
    """Rewrite an LU file in the chosen JSON dialect."""
    try:
        lus = read_lu_file(kb_file)
    except (OSError, LuImportError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot load {kb_file}: {exc}")
    write_lu_file(lus, out_path, dialect=dialect)
    click.echo(f"{len(lus)} logic units -> {out_path} ({dialect})")


# ---------------------------------------------------------------------------
# baselines


@main.command()
@click.argument("doc", type=click.Path(exists=True, dir_okay=False))
@config_option
@click.option("--chunk-size", type=int, default=None, help="Token budget per chunk.")
@click.option("--overlap", type=int, default=None, help="Tokens carried between chunks.")
@json_option
def chunk(doc: str, config_path: str | None, chunk_size: int | None, overlap: int | None, as_json: bool) -> None:
    """Split one document into overlapping fixed-size chunks."""
    config = _load_config(config_path)
    cfg = ChunkConfig(
        chunk_size=_cfg(config, "chunk", "chunk_size", chunk_size, 1000),
        overlap=_cfg(config, "chunk", "overlap", overlap, 50),
    )
    text = Path(doc).read_text(encoding="utf-8")
    chunks = recursive_chunk(Path(doc).stem, text, cfg)
    if as_json:
        _echo_json([
            {"index": c.index, "start": c.start, "end": c.end, "tokens": c.token_count()}
            for c in chunks
        ])
        return
    for c in chunks:
        click.echo(f"chunk {c.index}: chars {c.start}..{c.end}, {c.token_count()} tokens")
    click.echo(f"{len(chunks)} chunks at size {cfg.chunk_size}, overlap {cfg.overlap}")


# ---------------------------------------------------------------------------
# sessions


@main.command()
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True, dir_okay=False))
@config_option
@click.option("--question", required=True, help="Opening question.")
@click.option(
    "--feedback", "feedback_texts", multiple=True,
    help="Scripted outcome per turn; omit for interactive prompts.",
)
@click.option("--max-turns", type=int, default=None)
@json_option
def session(
    kb_path: str,
    config_path: str | None,
    question: str,
    feedback_texts: tuple[str, ...],
    max_turns: int | None,
    as_json: bool,
) -> None:
    """Run one feedback-driven session, scripted or interactive."""
    config = _load_config(config_path)
    session_cfg = SessionConfig(
        retrieve_k=_cfg(config, "session", "retrieve_k", None, 5),
        score_floor=_cfg(config, "session", "score_floor", None, 0.05),
        max_turns=_cfg(config, "session", "max_turns", max_turns, 20),
        branch_floor=_cfg(config, "session", "branch_floor", None, 0.3),
    )
    engine = SessionEngine(_load_kb(kb_path), session_cfg)
    state, resp = engine.start(question)
    scripted = list(feedback_texts)
    while True:
        if not as_json:
            click.echo(f"[{resp.kind.value}] {resp.text}")
        if state.is_terminal:
            break
        if scripted:
            answer = scripted.pop(0)
        elif feedback_texts:
            break  # scripted run exhausted its answers
        else:
            answer = click.prompt("you", type=str)
        if state.status is SessionStatus.AWAITING_CLARIFICATION:
            state, resp = engine.clarify(state, answer)
        else:
            state, resp = engine.feedback(state, answer)
    if as_json:
        _echo_json({
            "status": state.status.value,
            "turns": state.turn_count,
            "transcript": export_transcript(state),
        })
    if state.status in (SessionStatus.NO_INFO, SessionStatus.ESCALATED):
        sys.exit(1)


# ---------------------------------------------------------------------------
# evaluation


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@config_option
@click.option("--tasks", "tasks_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Task file (default: CORPUS_DIR/tasks.json).")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None,
              help="Write records_<paradigm>.jsonl files here.")
@click.option("--chunk-size", type=int, default=None)
@click.option("--overlap", type=int, default=None)
@click.option("--chunk-top-k", type=int, default=None)
@json_option
def bench(
    corpus_dir: str,
    config_path: str | None,
    tasks_path: str | None,
    out_dir: str | None,
    chunk_size: int | None,
    overlap: int | None,
    chunk_top_k: int | None,
    as_json: bool,
) -> None:
    """Run every task under each paradigm and print the score table."""
    config = _load_config(config_path)
    try:
        docs, lus, manifest = load_corpus(corpus_dir)
        tasks = tasks_from_json(tasks_path or Path(corpus_dir) / "tasks.json")
    except (OSError, KeyError, ValueError) as exc:
        raise click.ClickException(f"cannot load benchmark inputs: {exc}")
    profile = manifest.get("chunk_profile", {})
    chunk_cfg = ChunkConfig(
        chunk_size=_cfg(config, "chunk", "chunk_size", chunk_size, profile.get("chunk_size", 1000)),
        overlap=_cfg(config, "chunk", "overlap", overlap, profile.get("overlap", 50)),
    )
    kb = build_index(lus, HashingEmbedder())
    results = run_suite(
        tasks, kb, docs,
        chunk_config=chunk_cfg,
        chunk_top_k=_cfg(config, "bench", "chunk_top_k", chunk_top_k, 5),
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for paradigm, records in results.items():
            write_records(records, out / f"records_{paradigm}.jsonl")
    reports = [compute_metrics(records) for records in results.values()]
    if as_json:
        _echo_json(report_rows(reports))
    else:
        click.echo(render_report(reports))


@main.command()
@click.argument("record_files", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@json_option
def report(record_files: tuple[str, ...], as_json: bool) -> None:
    """Aggregate record files (one paradigm each) into a score table."""
    reports = []
    for path in record_files:
        try:
            records = read_records(path)
            reports.append(compute_metrics(records))
        except (ValueError, json.JSONDecodeError) as exc:
            raise click.ClickException(f"{path}: {exc}")
    if as_json:
        _echo_json(report_rows(reports))
    else:
        click.echo(render_report(reports))


# ---------------------------------------------------------------------------
# serving


@main.command()
@click.option("--kb", "kb_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="LU file to serve (default: start empty and ingest over HTTP).")
@config_option
@click.option("--host", default=None, help="Bind address.")
@click.option("--port", type=int, default=None, help="Port (default: $THREADKB_PORT or 8787).")
def serve(kb_path: str | None, config_path: str | None, host: str | None, port: int | None) -> None:
    """Serve the HTTP API."""
    import uvicorn

    from .service import DEFAULT_PORT, create_app

    config = _load_config(config_path)
    kb = _load_kb(kb_path) if kb_path else None
    env_port = os.environ.get("THREADKB_PORT")
    resolved_port = _cfg(
        config, "serve", "port", port, int(env_port) if env_port else DEFAULT_PORT
    )
    app = create_app(kb, token=config.get("serve", {}).get("token"))
    uvicorn.run(app, host=_cfg(config, "serve", "host", host, "127.0.0.1"), port=resolved_port)

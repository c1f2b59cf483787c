"""Logic-unit data model, validation, and JSON serialization.

A logic unit (LU) is the retrieval unit of the knowledge base: a typed
record with prerequisite, header, body, linker branches, and source
metadata. Two JSON dialects are supported at the serialization
boundary:

* ``normalized``: conventional snake_case keys, linker as a list of
  branch objects, explicit id. Used for storage.
* ``paper-hash-keys``: the ``#field#`` key style with the linker
  rendered as one concatenated sentence string. Used for prompt
  payloads and interchange with external tooling.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import Enum

from .linker import (
    LinkerBranch,
    LinkerParseError,
    VALID_TOKENS,
    parse_linker_block,
    render_linker_text,
)

__all__ = [
    "LUType",
    "FormatTag",
    "MetaData",
    "LinkerBranch",
    "LogicUnit",
    "SourceDocument",
    "ValidationReport",
    "LuImportError",
    "compute_lu_id",
    "make_logic_unit",
    "validate_lu",
    "export_paper_json",
    "import_paper_json",
    "lu_to_record",
    "lu_from_record",
    "write_lu_file",
    "read_lu_file",
]


class LUType(str, Enum):
    STEP = "Step"
    TERMINOLOGY = "Terminology"
    FAQ = "FAQ"
    APPENDIX = "Appendix"

    @classmethod
    def from_string(cls, raw: str) -> "LUType":
        for member in cls:
            if member.value.lower() == raw.strip().lower():
                return member
        raise ValueError(f"unknown LU type: {raw!r}")


class FormatTag(str, Enum):
    STRUCTURED = "structured"
    HIERARCHICAL = "hierarchical"
    TABULAR = "tabular"
    NARRATIVE = "narrative"
    UNKNOWN = "unknown"

    @classmethod
    def from_string(cls, raw: str) -> "FormatTag":
        for member in cls:
            if member.value == raw.strip().lower():
                return member
        raise ValueError(f"unknown format tag: {raw!r}")


@dataclass(frozen=True)
class MetaData:
    """Provenance of an LU: which source document it came from."""

    source_doc_id: str
    title: str = ""
    date: str = ""
    format_tag: FormatTag = FormatTag.UNKNOWN


@dataclass(frozen=True)
class LogicUnit:
    """One retrieval unit.

    The header is the indexed summary of the unit; the body carries the
    content handed to generation; linker branches connect outcomes to
    the next retrieval query. ``default_parameters`` maps ``<NAME>``
    placeholders appearing in body code blocks to default values.
    """

    id: str
    lu_type: LUType
    meta: MetaData
    header: str
    body: str
    prerequisite: str = ""
    linker: tuple[LinkerBranch, ...] = ()
    default_parameters: dict[str, str] = field(default_factory=dict)

    @property
    def is_terminal_step(self) -> bool:
        return self.lu_type is LUType.STEP and not self.linker


@dataclass(frozen=True)
class SourceDocument:
    """Raw input document prior to structuring."""

    id: str
    title: str
    raw_text: str
    format_tag: FormatTag = FormatTag.UNKNOWN


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


class LuImportError(ValueError):
    """Raised when LU JSON cannot be parsed or fails validation."""


# Placeholders are uppercase-with-spaces tags like <TIME> or <CLUSTER NAME>.
PLACEHOLDER_RE = re.compile(r"<[A-Z][A-Z0-9]*(?: [A-Z0-9]+)*>")

_FENCE_RE = re.compile(r"^\s*```")


def compute_lu_id(source_doc_id: str, header: str, body: str) -> str:
    """Content hash of (source doc, header, body), truncated to 16 hex chars.

    Stable across re-ingestion of unchanged content, which keeps update
    diffs cheap.
    """
    digest = hashlib.sha256(
        "\x1f".join((source_doc_id, header, body)).encode("utf-8")
    ).hexdigest()
    return digest[:16]


def make_logic_unit(
    lu_type: LUType,
    meta: MetaData,
    header: str,
    body: str,
    prerequisite: str = "",
    linker: tuple[LinkerBranch, ...] | list[LinkerBranch] = (),
    default_parameters: dict[str, str] | None = None,
) -> LogicUnit:
    """Construct an LU with its canonical content-hash id."""
    return LogicUnit(
        id=compute_lu_id(meta.source_doc_id, header, body),
        lu_type=lu_type,
        meta=meta,
        header=header,
        body=body,
        prerequisite=prerequisite,
        linker=tuple(linker),
        default_parameters=dict(default_parameters or {}),
    )


def code_block_spans(body: str) -> list[str]:
    """Return the contents of fenced code blocks in a body, in order.

    An unterminated fence runs to the end of the text.
    """
    blocks: list[str] = []
    current: list[str] | None = None
    for line in body.splitlines():
        if _FENCE_RE.match(line):
            if current is None:
                current = []
            else:
                blocks.append("\n".join(current))
                current = None
            continue
        if current is not None:
            current.append(line)
    if current is not None:
        blocks.append("\n".join(current))
    return blocks


def body_placeholders(body: str) -> list[str]:
    """Placeholders appearing inside the body's fenced code blocks."""
    seen: list[str] = []
    for block in code_block_spans(body):
        for ph in PLACEHOLDER_RE.findall(block):
            if ph not in seen:
                seen.append(ph)
    return seen


def _valid_iso_date(raw: str) -> bool:
    for parser in (_dt.datetime.fromisoformat, _dt.date.fromisoformat):
        try:
            parser(raw)
            return True
        except ValueError:
            continue
    return False


def validate_lu(lu: LogicUnit) -> ValidationReport:
    """Check an LU against the structural invariants.

    Pure: the same input always yields the same report. Errors mark
    violated invariants; warnings flag unbound placeholders and
    terminal steps.
    """
    report = ValidationReport()
    if not lu.id.strip():
        report.errors.append("missing id")
    if not lu.header.strip():
        report.errors.append("missing header")
    if not lu.body.strip():
        report.errors.append("missing body")
    if not lu.meta.source_doc_id.strip():
        report.errors.append("missing source_doc_id")
    if lu.meta.date and not _valid_iso_date(lu.meta.date):
        report.errors.append(f"invalid date: {lu.meta.date!r}")

    for i, branch in enumerate(lu.linker):
        where = f"branch {i}"
        if not branch.condition.strip():
            report.errors.append(f"{where}: empty condition")
        if not branch.next_intent.strip():
            report.errors.append(f"{where}: empty next-intent")
        if branch.token:
            if branch.token not in VALID_TOKENS:
                report.errors.append(f"{where}: unknown linker token: {branch.token!r}")
        elif lu.lu_type is LUType.STEP:
            # Every branch of a Step LU must carry a token.
            report.errors.append(f"{where}: missing linker token")
        else:
            report.warnings.append(f"{where}: branch without token")

    for ph in body_placeholders(lu.body):
        if ph not in lu.default_parameters:
            report.warnings.append(f"unbound placeholder {ph}")

    if lu.is_terminal_step:
        report.warnings.append("terminal step: empty linker")
    return report


def _slugify(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return slug or "unknown-source"


# -- hash-key dialect ---------------------------------------------------------

def export_paper_json(lu: LogicUnit) -> str:
    """Serialize an LU as one JSON object in the ``#field#`` key dialect.

    The linker is rendered as the concatenated sentence string; the
    format tag is emitted only when set, keeping the output
    byte-compatible with prompt payload examples.
    """
    meta: dict[str, str] = {
        "#title#": lu.meta.title,
        "#id#": lu.meta.source_doc_id,
        "#date#": lu.meta.date,
    }
    if lu.meta.format_tag is not FormatTag.UNKNOWN:
        meta["#format#"] = lu.meta.format_tag.value
    obj = {
        "#type#": lu.lu_type.value.lower(),
        "#meta data#": meta,
        "#prerequisite#": lu.prerequisite,
        "#header#": lu.header,
        "#body#": lu.body,
        "#linker#": render_linker_text(lu.linker),
        "#default_parameters#": dict(lu.default_parameters),
    }
    return json.dumps(obj, ensure_ascii=False)


def import_paper_json(text: str) -> LogicUnit:
    """Parse one ``#field#`` dialect JSON object into a validated LU.

    The LU id is recomputed from content, so export followed by import
    reproduces the original unit exactly for canonically built LUs. An
    empty ``#id#`` in the metadata falls back to a slug of the title.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LuImportError(f"malformed JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise LuImportError("expected a JSON object")
    if "#header#" not in obj or not str(obj.get("#header#", "")).strip():
        raise LuImportError("missing #header#")
    raw_type = str(obj.get("#type#", "")).strip()
    if not raw_type:
        raise LuImportError("missing #type#")
    try:
        lu_type = LUType.from_string(raw_type)
    except ValueError as exc:
        raise LuImportError(str(exc)) from exc

    raw_meta = obj.get("#meta data#") or {}
    title = str(raw_meta.get("#title#", ""))
    doc_id = str(raw_meta.get("#id#", "")).strip() or _slugify(title)
    raw_format = str(raw_meta.get("#format#", "")).strip()
    try:
        format_tag = FormatTag.from_string(raw_format) if raw_format else FormatTag.UNKNOWN
    except ValueError as exc:
        raise LuImportError(str(exc)) from exc
    meta = MetaData(
        source_doc_id=doc_id,
        title=title,
        date=str(raw_meta.get("#date#", "")),
        format_tag=format_tag,
    )

    try:
        branches = parse_linker_block(str(obj.get("#linker#", "")))
    except LinkerParseError as exc:
        raise LuImportError(f"bad #linker#: {exc}") from exc

    defaults = {str(k): str(v) for k, v in (obj.get("#default_parameters#") or {}).items()}
    lu = make_logic_unit(
        lu_type=lu_type,
        meta=meta,
        header=str(obj["#header#"]),
        body=str(obj.get("#body#", "")),
        prerequisite=str(obj.get("#prerequisite#", "")),
        linker=branches,
        default_parameters=defaults,
    )
    report = validate_lu(lu)
    if not report.ok:
        raise LuImportError("; ".join(report.errors))
    return lu


# -- normalized dialect -------------------------------------------------------

def lu_to_record(lu: LogicUnit) -> dict:
    """LU as a plain snake_case dict (normalized dialect)."""
    return {
        "id": lu.id,
        "type": lu.lu_type.value,
        "meta": {
            "source_doc_id": lu.meta.source_doc_id,
            "title": lu.meta.title,
            "date": lu.meta.date,
            "format": lu.meta.format_tag.value,
        },
        "prerequisite": lu.prerequisite,
        "header": lu.header,
        "body": lu.body,
        "linker": [
            {"condition": b.condition, "next_intent": b.next_intent, "token": b.token}
            for b in lu.linker
        ],
        "default_parameters": dict(lu.default_parameters),
    }


def lu_from_record(record: dict) -> LogicUnit:
    try:
        meta_rec = record.get("meta") or {}
        meta = MetaData(
            source_doc_id=str(meta_rec.get("source_doc_id", "")),
            title=str(meta_rec.get("title", "")),
            date=str(meta_rec.get("date", "")),
            format_tag=FormatTag.from_string(meta_rec.get("format", "unknown")),
        )
        branches = tuple(
            LinkerBranch(
                condition=str(b["condition"]),
                next_intent=str(b["next_intent"]),
                token=str(b["token"]),
            )
            for b in record.get("linker", [])
        )
        return LogicUnit(
            id=str(record["id"]),
            lu_type=LUType.from_string(record["type"]),
            meta=meta,
            header=str(record["header"]),
            body=str(record["body"]),
            prerequisite=str(record.get("prerequisite", "")),
            linker=branches,
            default_parameters={
                str(k): str(v) for k, v in (record.get("default_parameters") or {}).items()
            },
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise LuImportError(f"bad LU record: {exc}") from exc


# -- interchange files --------------------------------------------------------

FILE_FORMAT = "threadkb-lus"
FILE_VERSION = 1


def write_lu_file(lus: list[LogicUnit], path, dialect: str = "normalized") -> None:
    """Write LUs as JSON lines, one per LU, after a version header line."""
    if dialect not in ("normalized", "paper"):
        raise ValueError(f"unknown dialect: {dialect!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": FILE_FORMAT, "version": FILE_VERSION, "dialect": dialect}))
        fh.write("\n")
        for lu in lus:
            if dialect == "paper":
                fh.write(export_paper_json(lu))
            else:
                fh.write(json.dumps(lu_to_record(lu), ensure_ascii=False))
            fh.write("\n")


def read_lu_file(path) -> list[LogicUnit]:
    """Read an LU interchange file in either dialect."""
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            return []
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise LuImportError(f"bad file header: {exc}") from exc
        if header.get("format") != FILE_FORMAT:
            raise LuImportError(f"not a {FILE_FORMAT} file")
        if header.get("version") != FILE_VERSION:
            raise LuImportError(f"unsupported file version: {header.get('version')}")
        dialect = header.get("dialect", "normalized")
        lus: list[LogicUnit] = []
        for line in fh:
            if not line.strip():
                continue
            if dialect == "paper":
                lus.append(import_paper_json(line))
            else:
                lus.append(lu_from_record(json.loads(line)))
        return lus

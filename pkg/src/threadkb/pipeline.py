"""Document pipeline: source text to validated, merged logic units.

Stages, in order: optional model-assisted reformulation into structured
markdown-equivalent JSON (with one refinement round), deterministic
structured-markdown parsing, LU extraction with rule-based code-template
lifting, similarity merging (pair and chain), and whole-document KB
replacement.

Code parameters are lifted by configurable regex patterns rather than a
model by default, so the offline path is fully deterministic; the
gateway-backed extractor is available where a model endpoint exists.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field, replace

from . import prompts
from .gateway import ChatGateway, GatewayError, extract_json, script_tag
from .linker import TOKEN_CONTINUE, TOKEN_CROSS, LinkerParseError, parse_linker_block
from .model import (
    PLACEHOLDER_RE,
    FormatTag,
    LogicUnit,
    LUType,
    MetaData,
    SourceDocument,
    body_placeholders,
    make_logic_unit,
    validate_lu,
)
from .store import KnowledgeBase, build_index
from .tokens import jaccard


class PipelineError(RuntimeError):
    """Unrecoverable pipeline failure for one document."""


class PipelineWarning(UserWarning):
    """Non-fatal pipeline finding (terminal steps, skipped sections...)."""


_H1_RE = re.compile(r"^#\s+(.*)$")
_H2_RE = re.compile(r"^##\s+(.*)$")
_SUB_RE = re.compile(r"^###\s+(Prerequisite|Header|Body|Linker)\s*$", re.IGNORECASE)
_H3_RE = re.compile(r"^###\s+(.*)$")
_FENCE_RE = re.compile(r"^\s*```")
_CATEGORY_MARK_RE = re.compile(r"\s*\[(TERMINOLOGY|FAQ|STEP|APPENDIX)\]\s*$")
_NUMBER_PREFIX_RE = re.compile(r"^\d+\s*[.):]\s*")

_CATEGORY_KEYWORDS = {
    "terminology": LUType.TERMINOLOGY,
    "faq": LUType.FAQ,
    "appendix": LUType.APPENDIX,
    "step": LUType.STEP,
    "steps": LUType.STEP,
}

CHAIN_BODY_SEPARATOR = "\n\n"


@dataclass(frozen=True)
class DocSection:
    """One structured section: a category plus the four sub-blocks."""

    category: LUType
    title: str
    prerequisite: str = ""
    header: str = ""
    body: str = ""
    linker_text: str = ""


@dataclass(frozen=True)
class StructuredDoc:
    meta: MetaData
    sections: tuple[DocSection, ...]


@dataclass(frozen=True)
class MergePolicy:
    header_sim_threshold: float = 0.85
    body_sim_threshold: float = 0.80
    chain_merge_enabled: bool = True
    # Best chain target must beat the runner-up by this cosine margin.
    chain_margin: float = 0.05

    def __post_init__(self) -> None:
        for name in ("header_sim_threshold", "body_sim_threshold"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} out of (0, 1]: {value}")


@dataclass(frozen=True)
class ParameterPattern:
    """Regex lifting one kind of code literal into a placeholder.

    Group 1 of the regex captures the literal; the whole capture is
    replaced by the placeholder (numbered when several distinct
    literals match the same pattern).
    """

    placeholder: str
    regex: str

    def compiled(self) -> re.Pattern:
        return re.compile(self.regex)


DEFAULT_PARAMETER_PATTERNS: tuple[ParameterPattern, ...] = (
    ParameterPattern("<TIME>", r"ago\((\d+[smhd])\)"),
    ParameterPattern("<TIME>", r"\b(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z?)\b"),
    ParameterPattern("<CLUSTER NAME>", r"[Cc]luster\w*\s*==\s*\"([^\"]+)\""),
    ParameterPattern("<THRESHOLD>", r"(?:>=|<=|>|<)\s*(\d+(?:\.\d+)?)\b"),
)


@dataclass
class PipelineConfig:
    reformulate_mode: str = "auto"  # auto | always | never
    merge_policy: MergePolicy = field(default_factory=MergePolicy)
    parameter_patterns: tuple[ParameterPattern, ...] = DEFAULT_PARAMETER_PATTERNS
    merge_across_docs: bool = False
    reformulation_examples: str = prompts.DEFAULT_REFORMULATION_EXAMPLES

    def __post_init__(self) -> None:
        if self.reformulate_mode not in ("auto", "always", "never"):
            raise ValueError(f"unknown reformulate mode: {self.reformulate_mode!r}")


# ---------------------------------------------------------------------------
# structured-markdown parsing


def _detect_category(title: str, has_linker: bool) -> tuple[LUType, str]:
    """Category of a section heading, and the title with markers removed."""
    mark = _CATEGORY_MARK_RE.search(title)
    if mark:
        return LUType.from_string(mark.group(1).capitalize()), title[: mark.start()].strip()
    for word in re.findall(r"[A-Za-z]+", title.lower()):
        if word in _CATEGORY_KEYWORDS:
            return _CATEGORY_KEYWORDS[word], title.strip()
    # Linker presence is the strongest structural signal for a step.
    return (LUType.STEP if has_linker else LUType.APPENDIX), title.strip()


def parse_structured_doc(markdown: str, meta: MetaData) -> StructuredDoc:
    """Deterministic parse of structured markdown into sections.

    Second-level headings open sections; the four known third-level
    headings open sub-blocks; any other heading or loose text inside a
    section is attached to the body. Fenced code blocks are opaque.
    """
    title = meta.title
    raw_sections: list[tuple[str, dict[str, list[str]]]] = []
    current: dict[str, list[str]] | None = None
    block = "body"
    in_fence = False

    for line in markdown.splitlines():
        if _FENCE_RE.match(line):
            in_fence = not in_fence
            if current is not None:
                current[block].append(line)
            continue
        if in_fence:
            if current is not None:
                current[block].append(line)
            continue
        h1 = _H1_RE.match(line)
        if h1 and current is None:
            if not title:
                title = h1.group(1).strip()
            continue
        h2 = _H2_RE.match(line)
        if h2:
            current = {"prerequisite": [], "header": [], "body": [], "linker": []}
            raw_sections.append((h2.group(1).strip(), current))
            block = "body"
            continue
        if current is None:
            continue
        sub = _SUB_RE.match(line)
        if sub:
            block = sub.group(1).lower()
            continue
        if _H3_RE.match(line):
            block = "body"
        current[block].append(line)

    if not raw_sections:
        raise PipelineError(
            "unstructured input: no second-level sections found; reformulate first"
        )

    sections = []
    for heading, blocks in raw_sections:
        linker_text = "\n".join(blocks["linker"]).strip()
        category, clean_title = _detect_category(heading, bool(linker_text))
        sections.append(
            DocSection(
                category=category,
                title=clean_title,
                prerequisite="\n".join(blocks["prerequisite"]).strip(),
                header="\n".join(blocks["header"]).strip(),
                body="\n".join(blocks["body"]).strip(),
                linker_text=linker_text,
            )
        )
    out_meta = replace(meta, title=title) if title != meta.title else meta
    return StructuredDoc(meta=out_meta, sections=tuple(sections))


def render_structured_doc(sdoc: StructuredDoc) -> str:
    """Render sections back to markdown; parse∘render is identity.

    Category markers are appended to headings so the category survives
    the round trip even for sections without a linker.
    """
    lines: list[str] = []
    if sdoc.meta.title:
        lines += [f"# {sdoc.meta.title}", ""]
    for section in sdoc.sections:
        lines += [f"## {section.title} [{section.category.value.upper()}]", ""]
        for name, text in (
            ("Prerequisite", section.prerequisite),
            ("Header", section.header),
            ("Body", section.body),
            ("Linker", section.linker_text),
        ):
            if text:
                lines += [f"### {name}", "", text, ""]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# reformulation


def _sections_from_reply(reply) -> tuple[DocSection, ...]:
    """Build sections from the category-keyed JSON reply shape."""
    if not isinstance(reply, dict):
        raise PipelineError(f"reformulation reply is not an object: {type(reply).__name__}")
    sections: list[DocSection] = []
    for key, entries in reply.items():
        category = _CATEGORY_KEYWORDS.get(str(key).strip().lower())
        if category is None:
            warnings.warn(f"skipping unknown category key: {key!r}", PipelineWarning, stacklevel=3)
            continue
        if not isinstance(entries, list):
            raise PipelineError(f"category {key!r} is not a list")
        for entry in entries:
            if not isinstance(entry, dict):
                raise PipelineError(f"entry under {key!r} is not an object")
            header = str(entry.get("header", "")).strip()
            sections.append(
                DocSection(
                    category=category,
                    title=header,
                    prerequisite=str(entry.get("prerequisite", "")).strip(),
                    header=header,
                    body=str(entry.get("body", "")).strip(),
                    linker_text=str(entry.get("linker", "")).strip(),
                )
            )
    return tuple(sections)


def _parse_reformulation_reply(reply: str, meta: MetaData) -> tuple[DocSection, ...]:
    """JSON first; structured markdown accepted as a fallback carrier."""
    try:
        return _sections_from_reply(extract_json(reply))
    except (json.JSONDecodeError, PipelineError):
        pass
    try:
        return parse_structured_doc(reply, meta).sections
    except PipelineError:
        raise json.JSONDecodeError("neither JSON nor structured markdown", reply, 0)


def _merge_refined(
    draft: tuple[DocSection, ...], refined: tuple[DocSection, ...]
) -> tuple[DocSection, ...]:
    """Fill draft omissions from the refinement reply; append new sections."""
    merged = list(draft)
    index = {(s.category, s.header): i for i, s in enumerate(merged)}
    for section in refined:
        key = (section.category, section.header)
        if key in index:
            base = merged[index[key]]
            merged[index[key]] = DocSection(
                category=base.category,
                title=base.title or section.title,
                prerequisite=base.prerequisite or section.prerequisite,
                header=base.header or section.header,
                body=base.body or section.body,
                linker_text=base.linker_text or section.linker_text,
            )
        else:
            merged.append(section)
    return tuple(merged)


def _doc_meta(doc: SourceDocument) -> MetaData:
    return MetaData(source_doc_id=doc.id, title=doc.title, format_tag=doc.format_tag)


def reformulate(
    doc: SourceDocument,
    gateway: ChatGateway,
    examples: str = prompts.DEFAULT_REFORMULATION_EXAMPLES,
) -> StructuredDoc:
    """Model-assisted restructuring of one document, plus one refinement round.

    Documents already tagged as structured are parsed directly, with no
    model call. The refinement round feeds the draft back with the
    source and merges whatever the model adds or completes.
    """
    if not doc.raw_text.strip():
        raise PipelineError(f"document {doc.id}: empty input")
    meta = _doc_meta(doc)
    if doc.format_tag is FormatTag.STRUCTURED:
        return parse_structured_doc(doc.raw_text, meta)

    prompt = (
        prompts.fill(prompts.REFORMULATION_PROMPT, EXAMPLES=examples, TSG=doc.raw_text)
        + "\n"
        + script_tag("reformulate", doc.id)
    )
    reply = gateway.complete(prompt)
    try:
        draft = _parse_reformulation_reply(reply, meta)
    except json.JSONDecodeError:
        retry_reply = gateway.complete(prompt + "\n\nReturn valid JSON only.")
        try:
            draft = _parse_reformulation_reply(retry_reply, meta)
        except json.JSONDecodeError as exc:
            raise PipelineError(
                f"document {doc.id}: reformulation reply unparseable after retry"
            ) from exc

    refine_prompt = (
        prompts.fill(
            prompts.REFINEMENT_PROMPT,
            TSG=doc.raw_text,
            DRAFT=json.dumps(_sections_to_reply(draft), ensure_ascii=False, indent=2),
        )
        + "\n"
        + script_tag("refine", doc.id)
    )
    refine_reply = gateway.complete(refine_prompt)
    try:
        refined = _parse_reformulation_reply(refine_reply, meta)
    except json.JSONDecodeError:
        retry_reply = gateway.complete(refine_prompt + "\n\nReturn valid JSON only.")
        try:
            refined = _parse_reformulation_reply(retry_reply, meta)
        except json.JSONDecodeError as exc:
            raise PipelineError(
                f"document {doc.id}: refinement reply unparseable after retry"
            ) from exc
    sections = _merge_refined(draft, refined)
    if not sections:
        raise PipelineError(f"document {doc.id}: empty section list")
    return StructuredDoc(meta=meta, sections=sections)


def _sections_to_reply(sections: tuple[DocSection, ...]) -> dict:
    """Inverse of _sections_from_reply, used to echo the draft back."""
    out: dict[str, list[dict]] = {}
    for s in sections:
        key = "STEP" if s.category is LUType.STEP else s.category.value
        out.setdefault(key, []).append(
            {
                "prerequisite": s.prerequisite,
                "header": s.header,
                "body": s.body,
                "linker": s.linker_text,
            }
        )
    return out


# ---------------------------------------------------------------------------
# code templates


def extract_code_template(
    code_block: str,
    patterns: tuple[ParameterPattern, ...] = DEFAULT_PARAMETER_PATTERNS,
) -> tuple[str, dict[str, str]]:
    """Lift concrete literals in a code block into placeholders.

    Each distinct literal gets one placeholder (numbered past the
    first for the same pattern); repeated literals reuse theirs. A
    block with no matches comes back unchanged with empty defaults.
    """
    defaults: dict[str, str] = {}
    by_literal: dict[tuple[str, str], str] = {}
    counts: dict[str, int] = {}
    template = code_block

    for pattern in patterns:
        compiled = pattern.compiled()
        pos = 0
        while True:
            m = compiled.search(template, pos)
            if m is None:
                break
            literal = m.group(1)
            if PLACEHOLDER_RE.fullmatch(literal):
                # Already templated (by hand or an earlier pattern).
                pos = m.end()
                continue
            key = (pattern.placeholder, literal)
            placeholder = by_literal.get(key)
            if placeholder is None:
                counts[pattern.placeholder] = counts.get(pattern.placeholder, 0) + 1
                n = counts[pattern.placeholder]
                placeholder = (
                    pattern.placeholder
                    if n == 1
                    else f"{pattern.placeholder[:-1]} {n}>"
                )
                by_literal[key] = placeholder
                defaults[placeholder] = literal
            start, end = m.span(1)
            template = template[:start] + placeholder + template[end:]
            pos = start + len(placeholder)
    return template, defaults


def extract_code_template_llm(
    code_block: str, gateway: ChatGateway, examples: str = ""
) -> tuple[str, dict[str, str]]:
    """Gateway-backed variant; falls back to the block itself on failure."""
    prompt = (
        prompts.fill(prompts.CODE_TEMPLATE_PROMPT, EXAMPLES=examples, CODE=code_block)
        + "\n"
        + script_tag("code_template")
    )
    try:
        reply = gateway.complete_json(prompt)
        template = str(reply["#CODE_TEMPLATE#"])
        defaults = {str(k): str(v) for k, v in reply["#DEFAULT_PARAMETERS#"].items()}
        return template, defaults
    except (GatewayError, KeyError, AttributeError, TypeError):
        return code_block, {}


# ---------------------------------------------------------------------------
# LU extraction


def _apply_code_templates(
    body: str, patterns: tuple[ParameterPattern, ...]
) -> tuple[str, dict[str, str]]:
    """Template every fenced block in a body; returns new body + defaults."""
    lines = body.splitlines()
    defaults: dict[str, str] = {}
    out: list[str] = []
    buf: list[str] | None = None
    for line in lines:
        if _FENCE_RE.match(line):
            if buf is None:
                buf = []
                out.append(line)
            else:
                template, found = extract_code_template("\n".join(buf), patterns)
                defaults.update(found)
                out.extend(template.splitlines() if template else [])
                out.append(line)
                buf = None
            continue
        if buf is not None:
            buf.append(line)
        else:
            out.append(line)
    if buf is not None:
        template, found = extract_code_template("\n".join(buf), patterns)
        defaults.update(found)
        out.extend(template.splitlines() if template else [])
    return "\n".join(out), defaults


def extract_lus(
    sdoc: StructuredDoc,
    patterns: tuple[ParameterPattern, ...] = DEFAULT_PARAMETER_PATTERNS,
) -> list[LogicUnit]:
    """One validated LU per section.

    Header falls back to the section title (minus list numbering) when
    the Header sub-block is absent. Placeholders already present in
    code blocks are registered with empty defaults so the LU is
    self-describing.
    """
    lus: list[LogicUnit] = []
    for i, section in enumerate(sdoc.sections):
        where = f"section {i} ({section.title or 'untitled'})"
        header = section.header or _NUMBER_PREFIX_RE.sub("", section.title).strip()
        body, defaults = _apply_code_templates(section.body, patterns)
        try:
            branches = parse_linker_block(section.linker_text)
        except LinkerParseError as exc:
            raise PipelineError(f"{where}: {exc}") from exc
        lu = make_logic_unit(
            lu_type=section.category,
            meta=sdoc.meta,
            header=header,
            body=body,
            prerequisite=section.prerequisite,
            linker=branches,
            default_parameters=defaults,
        )
        # Pre-existing placeholders become explicit empty defaults.
        missing = [ph for ph in body_placeholders(lu.body) if ph not in lu.default_parameters]
        if missing:
            lu = replace(
                lu,
                default_parameters={**dict.fromkeys(missing, ""), **lu.default_parameters},
            )
        report = validate_lu(lu)
        if not report.ok:
            raise PipelineError(f"{where}: " + "; ".join(report.errors))
        for warning in report.warnings:
            warnings.warn(f"{where}: {warning}", PipelineWarning, stacklevel=2)
        lus.append(lu)
    return lus


# ---------------------------------------------------------------------------
# merging


def _similarity(a: str, b: str, embedder) -> float:
    if embedder is None:
        return jaccard(a, b)
    va, vb = embedder.embed([a, b])
    return float(va @ vb)


def _pair_merge(lus: list[LogicUnit], policy: MergePolicy, embedder) -> list[LogicUnit]:
    """Collapse near-duplicate Step LUs; first occurrence survives.

    The survivor keeps its own header and body, so similarities never
    change mid-pass and one ordered sweep reaches the fixpoint.
    """
    alive = list(lus)
    i = 0
    while i < len(alive):
        a = alive[i]
        if a.lu_type is not LUType.STEP:
            i += 1
            continue
        j = i + 1
        while j < len(alive):
            b = alive[j]
            if (
                b.lu_type is LUType.STEP
                and _similarity(a.header, b.header, embedder) >= policy.header_sim_threshold
                and _similarity(a.body, b.body, embedder) >= policy.body_sim_threshold
            ):
                seen = {(br.condition, br.next_intent, br.token) for br in a.linker}
                extra = tuple(
                    br
                    for br in b.linker
                    if (br.condition, br.next_intent, br.token) not in seen
                )
                prereqs = [p for p in (a.prerequisite, b.prerequisite) if p.strip()]
                prerequisite = " ".join(dict.fromkeys(prereqs))
                a = replace(
                    a,
                    linker=a.linker + extra,
                    prerequisite=prerequisite,
                    default_parameters={**b.default_parameters, **a.default_parameters},
                )
                alive[i] = a
                del alive[j]
            else:
                j += 1
        i += 1
    return alive


def _resolve_intent(
    intent: str, candidates: list[LogicUnit], policy: MergePolicy, embedder
) -> LogicUnit | None:
    """Unique LU whose header matches the intent, by threshold + margin."""
    scored = sorted(
        ((_similarity(intent, lu.header, embedder), lu.id, lu) for lu in candidates),
        key=lambda t: (-t[0], t[1]),
    )
    if not scored or scored[0][0] < policy.header_sim_threshold:
        return None
    if len(scored) > 1 and scored[0][0] - scored[1][0] < policy.chain_margin:
        return None
    return scored[0][2]


def _chain_merge(lus: list[LogicUnit], policy: MergePolicy, embedder) -> list[LogicUnit]:
    """Collapse single-CONTINUE chains head-first; cycles stay unmerged."""
    current = list(lus)
    warned_cycles: set[frozenset[str]] = set()
    for _ in range(len(lus) + 1):
        steps = [lu for lu in current if lu.lu_type is LUType.STEP]
        by_id = {lu.id: lu for lu in current}

        in_links: dict[str, set[str]] = {}
        for lu in current:
            for branch in lu.linker:
                if branch.token not in (TOKEN_CONTINUE, TOKEN_CROSS):
                    continue
                others = [s for s in steps if s.id != lu.id]
                target = _resolve_intent(branch.next_intent, others, policy, embedder)
                if target is not None:
                    in_links.setdefault(target.id, set()).add(lu.id)

        edges: dict[str, str] = {}
        for lu in steps:
            if len(lu.linker) != 1 or lu.linker[0].token != TOKEN_CONTINUE:
                continue
            others = [s for s in steps if s.id != lu.id]
            target = _resolve_intent(lu.linker[0].next_intent, others, policy, embedder)
            if target is None or in_links.get(target.id) != {lu.id}:
                continue
            edges[lu.id] = target.id

        if not edges:
            break

        # Separate cycle nodes from mergeable path heads.
        cycle_nodes: set[str] = set()
        for start in list(edges):
            seen: list[str] = []
            node = start
            while node in edges and node not in seen:
                seen.append(node)
                node = edges[node]
            if node in seen:
                cycle = seen[seen.index(node):]
                if frozenset(cycle) not in warned_cycles:
                    warned_cycles.add(frozenset(cycle))
                    path = " -> ".join(by_id[n].header for n in cycle)
                    warnings.warn(
                        f"chain-merge cycle detected, left unmerged: {path}",
                        PipelineWarning,
                        stacklevel=3,
                    )
                cycle_nodes.update(cycle)

        targets = set(edges.values())
        heads = [
            n for n in edges
            if n not in targets and n not in cycle_nodes
        ]
        if not heads:
            break

        merged_any = False
        absorbed: set[str] = set()
        replacements: dict[str, LogicUnit] = {}
        for head in heads:
            chain = [head]
            node = head
            while node in edges and edges[node] not in cycle_nodes and edges[node] not in absorbed:
                node = edges[node]
                chain.append(node)
            if len(chain) < 2:
                continue
            parts = [by_id[n] for n in chain]
            head_lu, tail_lu = parts[0], parts[-1]
            body = CHAIN_BODY_SEPARATOR.join(p.body for p in parts)
            defaults: dict[str, str] = {}
            for p in reversed(parts):
                defaults.update(p.default_parameters)
            merged = make_logic_unit(
                lu_type=LUType.STEP,
                meta=head_lu.meta,
                header=head_lu.header,
                body=body,
                prerequisite=head_lu.prerequisite,
                linker=tail_lu.linker,
                default_parameters=defaults,
            )
            replacements[head] = merged
            absorbed.update(chain[1:])
            merged_any = True

        if not merged_any:
            break
        current = [
            replacements.get(lu.id, lu) for lu in current if lu.id not in absorbed
        ]
    return current


def merge_lus(
    lus: list[LogicUnit], policy: MergePolicy, embedder=None
) -> list[LogicUnit]:
    """Pair-merge near-duplicates, then collapse linear chains."""
    merged = _pair_merge(lus, policy, embedder)
    if policy.chain_merge_enabled:
        merged = _chain_merge(merged, policy, embedder)
    return merged


# ---------------------------------------------------------------------------
# end-to-end per document


def ingest_document(
    doc: SourceDocument,
    config: PipelineConfig,
    gateway: ChatGateway | None = None,
    embedder=None,
) -> list[LogicUnit]:
    """Full pipeline for one document: structure, extract, merge."""
    needs_model = (
        config.reformulate_mode == "always"
        or (config.reformulate_mode == "auto" and doc.format_tag is not FormatTag.STRUCTURED)
    )
    if needs_model and doc.format_tag is not FormatTag.STRUCTURED:
        if gateway is None:
            raise PipelineError(
                f"document {doc.id}: reformulation requires a gateway "
                "(or pass --reformulate=never for structured input)"
            )
        sdoc = reformulate(doc, gateway, examples=config.reformulation_examples)
    else:
        sdoc = parse_structured_doc(doc.raw_text, _doc_meta(doc))
    lus = extract_lus(sdoc, config.parameter_patterns)
    return merge_lus(lus, config.merge_policy, embedder)


def update_kb(
    kb: KnowledgeBase,
    doc: SourceDocument,
    config: PipelineConfig,
    gateway: ChatGateway | None = None,
) -> KnowledgeBase:
    """Replace every LU sourced from this document; atomic on failure.

    The input snapshot is never mutated; any pipeline error propagates
    before a new index is built, so callers keep the old snapshot.
    """
    fresh = ingest_document(doc, config, gateway, kb.embedder)
    kept = [lu for lu in kb.lus if lu.meta.source_doc_id != doc.id]
    return build_index(kept + fresh, kb.embedder)

"""Vector index over logic units, with a binary persistence format.

The index embeds LU headers once at build time and answers queries by an
exhaustive cosine scan, which is exact and fast at the corpus sizes this
engine targets. Vectors are held as little-endian float32 so a persisted
file reloads bit-identically.

File layout: one JSON header line (magic, version, embedder id, dim,
count, body checksum), then `count` JSON LU lines in the normalized
dialect, then the raw float32 vector block.
"""

from __future__ import annotations

import hashlib
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .gateway import Embedder
from .model import LogicUnit, lu_from_record, lu_to_record
from .tokens import jaccard

KB_MAGIC = "THREADKB"
KB_VERSION = 1


class KbFormatError(ValueError):
    """Corrupt or unsupported knowledge-base file."""


@dataclass
class KnowledgeBase:
    """Immutable-by-convention snapshot: LUs plus their header vectors."""

    lus: list[LogicUnit]
    vectors: np.ndarray
    embedder_id: str
    dim: int
    embedder: Embedder | None = None
    _by_id: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.vectors.shape != (len(self.lus), self.dim):
            raise ValueError(
                f"vector block {self.vectors.shape} does not match "
                f"{len(self.lus)} LUs x {self.dim} dims"
            )
        self._by_id = {lu.id: i for i, lu in enumerate(self.lus)}

    def __len__(self) -> int:
        return len(self.lus)

    def get(self, lu_id: str) -> LogicUnit | None:
        idx = self._by_id.get(lu_id)
        return self.lus[idx] if idx is not None else None

    def doc_ids(self) -> set[str]:
        return {lu.meta.source_doc_id for lu in self.lus}


@dataclass(frozen=True)
class RetrievalResult:
    lu: LogicUnit
    score: float


def build_index(lus: list[LogicUnit], embedder: Embedder | None) -> KnowledgeBase:
    """Embed every LU header and assemble the scan index.

    With no embedder the index still works via lexical Jaccard scoring;
    vectors are stored as zeros in that case.
    """
    ids = [lu.id for lu in lus]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"duplicate LU ids: {dupes}")
    if embedder is None:
        dim = 0
        vectors = np.zeros((len(lus), 0), dtype="<f4")
        return KnowledgeBase(list(lus), vectors, "lexical-jaccard", dim)
    headers = [lu.header for lu in lus]
    if lus:
        vectors = embedder.embed(headers).astype("<f4")
    else:
        vectors = np.zeros((0, getattr(embedder, "dim", 0)), dtype="<f4")
    dim = vectors.shape[1]
    return KnowledgeBase(list(lus), vectors, embedder.embedder_id, dim, embedder)


def retrieve(
    kb: KnowledgeBase,
    query: str,
    k: int = 5,
    doc_id: str | None = None,
    exclude_ids: set[str] | None = None,
) -> list[RetrievalResult]:
    """Top-k LUs by query-header cosine, ties broken by ascending LU id.

    `doc_id` restricts candidates to one source document; `exclude_ids`
    drops specific LUs. Scores are clamped into [-1, 1].
    """
    if k <= 0:
        raise ValueError(f"k must be positive: {k}")
    candidates = [
        (i, lu)
        for i, lu in enumerate(kb.lus)
        if (doc_id is None or lu.meta.source_doc_id == doc_id)
        and (exclude_ids is None or lu.id not in exclude_ids)
    ]
    if not candidates:
        return []
    if kb.embedder is None:
        scored = [(jaccard(query, lu.header), lu) for _, lu in candidates]
    else:
        qvec = kb.embedder.embed([query])[0]
        scored = []
        for i, lu in candidates:
            vec = np.asarray(kb.vectors[i], dtype=np.float64)
            score = float(np.dot(vec, qvec))
            scored.append((min(1.0, max(-1.0, score)), lu))
    scored.sort(key=lambda pair: (-pair[0], pair[1].id))
    return [RetrievalResult(lu, score) for score, lu in scored[:k]]


# ---------------------------------------------------------------------------
# persistence


def _body_bytes(kb: KnowledgeBase) -> bytes:
    buf = io.BytesIO()
    for lu in kb.lus:
        line = json.dumps(lu_to_record(lu), ensure_ascii=False, sort_keys=True)
        buf.write(line.encode("utf-8"))
        buf.write(b"\n")
    buf.write(np.ascontiguousarray(kb.vectors, dtype="<f4").tobytes())
    return buf.getvalue()


def persist_kb(kb: KnowledgeBase, path: str) -> None:
    body = _body_bytes(kb)
    header = {
        "magic": KB_MAGIC,
        "version": KB_VERSION,
        "embedder_id": kb.embedder_id,
        "dim": kb.dim,
        "count": len(kb.lus),
        "checksum": hashlib.sha256(body).hexdigest(),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(body)


def load_kb(path: str, embedder: Embedder | None = None) -> KnowledgeBase:
    """Reload a persisted index; verifies checksum and embedder identity.

    A mismatched embedder id is a warning, not an error: the index is
    still usable for inspection, but fresh queries would live in a
    different vector space.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    newline = raw.find(b"\n")
    if newline < 0:
        raise KbFormatError("missing header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise KbFormatError(f"malformed header: {exc}") from exc
    if header.get("magic") != KB_MAGIC:
        raise KbFormatError(f"bad magic: {header.get('magic')!r}")
    if header.get("version") != KB_VERSION:
        raise KbFormatError(f"unsupported version: {header.get('version')!r}")
    body = raw[newline + 1 :]
    checksum = hashlib.sha256(body).hexdigest()
    if checksum != header.get("checksum"):
        raise KbFormatError("checksum mismatch: file is corrupt")

    count, dim = int(header["count"]), int(header["dim"])
    lus: list[LogicUnit] = []
    offset = 0
    for _ in range(count):
        end = body.find(b"\n", offset)
        if end < 0:
            raise KbFormatError("truncated LU section")
        lus.append(lu_from_record(json.loads(body[offset:end].decode("utf-8"))))
        offset = end + 1
    block = body[offset:]
    expected = count * dim * 4
    if len(block) != expected:
        raise KbFormatError(
            f"vector block is {len(block)} bytes, expected {expected}"
        )
    vectors = np.frombuffer(block, dtype="<f4").reshape(count, dim).copy()

    if embedder is not None and embedder.embedder_id != header["embedder_id"]:
        warnings.warn(
            f"embedder mismatch: index built with {header['embedder_id']!r}, "
            f"queries will use {embedder.embedder_id!r}",
            stacklevel=2,
        )
    return KnowledgeBase(lus, vectors, header["embedder_id"], dim, embedder)

"""Comparison baselines: chunk-based retrieval and whole-document retrieval.

The chunker is span-based: every chunk records exact character offsets
into the source text and its text is the literal slice, so a document
reconstructs losslessly from chunk offsets. Chunks are packed to a base
budget of (chunk_size - overlap) tokens and then extended backwards by
up to `overlap` tokens of trailing material from the previous chunk, so
no chunk ever exceeds chunk_size tokens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gateway import Embedder
from .tokens import count_token_spans, count_tokens, jaccard

DEFAULT_SEPARATORS = ("\n\n", "\n", ". ", " ")


@dataclass(frozen=True)
class ChunkConfig:
    chunk_size: int = 1000
    overlap: int = 50
    separators: tuple[str, ...] = DEFAULT_SEPARATORS

    def __post_init__(self) -> None:
        if self.chunk_size <= 0:
            raise ValueError(f"chunk_size must be positive: {self.chunk_size}")
        if not 0 <= self.overlap < self.chunk_size:
            raise ValueError(
                f"overlap must be in [0, chunk_size): {self.overlap}"
            )
        if any(not sep for sep in self.separators):
            raise ValueError("separators must be non-empty strings")


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    index: int
    start: int
    end: int
    text: str

    def token_count(self) -> int:
        return count_tokens(self.text)


def _hard_spans(text: str, start: int, end: int, budget: int) -> list[tuple[int, int]]:
    # No separator fits: cut at token starts so whitespace stays attached
    # to the preceding piece and slices remain exact.
    spans = count_token_spans(text[start:end])
    if len(spans) <= budget:
        return [(start, end)]
    out = []
    piece_start = start
    for i in range(budget, len(spans), budget):
        cut = start + spans[i][0]
        out.append((piece_start, cut))
        piece_start = cut
    out.append((piece_start, end))
    return out


def _piece_spans(
    text: str,
    start: int,
    end: int,
    separators: tuple[str, ...],
    budget: int,
) -> list[tuple[int, int]]:
    if count_tokens(text[start:end]) <= budget:
        return [(start, end)]
    if not separators:
        return _hard_spans(text, start, end, budget)
    sep, rest = separators[0], separators[1:]
    cuts = []
    pos = start
    while True:
        hit = text.find(sep, pos, end)
        if hit < 0:
            break
        cut = hit + len(sep)
        if cut < end:
            cuts.append(cut)
        pos = cut
    if not cuts:
        return _piece_spans(text, start, end, rest, budget)
    bounds = [start, *cuts, end]
    out = []
    for s, e in zip(bounds, bounds[1:]):
        out.extend(_piece_spans(text, s, e, rest, budget))
    return out


def recursive_chunk(doc_id: str, text: str, config: ChunkConfig) -> list[Chunk]:
    """Split a document into overlapping chunks of at most chunk_size tokens.

    The separator hierarchy is tried in order; each separator stays
    attached to the piece it terminates. Adjacent pieces are packed while
    their summed token counts fit the base budget; concatenation can only
    merge tokens at boundaries, so the packed text never exceeds it.
    """
    if not text:
        return []
    base = config.chunk_size - config.overlap
    pieces = _piece_spans(text, 0, len(text), config.separators, base)
    counts = [count_tokens(text[s:e]) for s, e in pieces]

    segments: list[tuple[int, int]] = []
    seg_start = 0
    running = 0
    for i, count in enumerate(counts):
        if running > 0 and running + count > base:
            segments.append((seg_start, i))
            seg_start, running = i, 0
        running += count
    segments.append((seg_start, len(pieces)))

    chunks = []
    for index, (lo, hi) in enumerate(segments):
        start = pieces[lo][0]
        if index > 0 and config.overlap:
            carried = 0
            prev_lo, _ = segments[index - 1]
            for j in range(lo - 1, prev_lo - 1, -1):
                if carried + counts[j] > config.overlap:
                    break
                carried += counts[j]
                start = pieces[j][0]
        end = pieces[hi - 1][1]
        chunks.append(Chunk(doc_id, index, start, end, text[start:end]))
    return chunks


# ---------------------------------------------------------------------------
# chunk retrieval


@dataclass
class ChunkIndex:
    chunks: list[Chunk]
    vectors: np.ndarray
    embedder: Embedder | None


@dataclass(frozen=True)
class ChunkResult:
    chunk: Chunk
    score: float


def build_chunk_index(chunks: list[Chunk], embedder: Embedder | None) -> ChunkIndex:
    if embedder is None or not chunks:
        dim = getattr(embedder, "dim", 0) if embedder else 0
        return ChunkIndex(list(chunks), np.zeros((len(chunks), dim), dtype="<f4"),
                          embedder)
    vectors = embedder.embed([chunk.text for chunk in chunks]).astype("<f4")
    return ChunkIndex(list(chunks), vectors, embedder)


def retrieve_chunks(index: ChunkIndex, query: str, k: int = 5) -> list[ChunkResult]:
    """Top-k chunks by query-text cosine, ties by (doc_id, index)."""
    if k <= 0:
        raise ValueError(f"k must be positive: {k}")
    if not index.chunks:
        return []
    if index.embedder is None:
        scored = [(jaccard(query, c.text), c) for c in index.chunks]
    else:
        qvec = index.embedder.embed([query])[0]
        scored = []
        for i, chunk in enumerate(index.chunks):
            vec = np.asarray(index.vectors[i], dtype=np.float64)
            score = float(np.dot(vec, qvec))
            scored.append((min(1.0, max(-1.0, score)), chunk))
    scored.sort(key=lambda pair: (-pair[0], pair[1].doc_id, pair[1].index))
    return [ChunkResult(chunk, score) for score, chunk in scored[:k]]


# ---------------------------------------------------------------------------
# whole-document retrieval


DOC_PREVIEW_TOKENS = 200


@dataclass(frozen=True)
class DocRecord:
    doc_id: str
    title: str
    text: str


@dataclass
class DocIndex:
    docs: list[DocRecord]
    vectors: np.ndarray
    embedder: Embedder | None


@dataclass(frozen=True)
class DocResult:
    doc: DocRecord
    score: float


def _doc_preview(doc: DocRecord) -> str:
    spans = count_token_spans(doc.text)
    if len(spans) > DOC_PREVIEW_TOKENS:
        cutoff = spans[DOC_PREVIEW_TOKENS - 1][1]
        body = doc.text[:cutoff]
    else:
        body = doc.text
    return f"{doc.title}\n{body}"


def build_doc_index(docs: list[DocRecord], embedder: Embedder | None) -> DocIndex:
    """Index whole documents by title plus the first 200 tokens of text."""
    ids = [d.doc_id for d in docs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate doc ids")
    if embedder is None or not docs:
        dim = getattr(embedder, "dim", 0) if embedder else 0
        return DocIndex(list(docs), np.zeros((len(docs), dim), dtype="<f4"),
                        embedder)
    vectors = embedder.embed([_doc_preview(d) for d in docs]).astype("<f4")
    return DocIndex(list(docs), vectors, embedder)


def retrieve_docs(index: DocIndex, query: str, k: int = 1) -> list[DocResult]:
    """Top-k documents by preview cosine, ties by ascending doc_id."""
    if k <= 0:
        raise ValueError(f"k must be positive: {k}")
    if not index.docs:
        return []
    if index.embedder is None:
        scored = [(jaccard(query, _doc_preview(d)), d) for d in index.docs]
    else:
        qvec = index.embedder.embed([query])[0]
        scored = []
        for i, doc in enumerate(index.docs):
            vec = np.asarray(index.vectors[i], dtype=np.float64)
            score = float(np.dot(vec, qvec))
            scored.append((min(1.0, max(-1.0, score)), doc))
    scored.sort(key=lambda pair: (-pair[0], pair[1].doc_id))
    return [DocResult(doc, score) for score, doc in scored[:k]]

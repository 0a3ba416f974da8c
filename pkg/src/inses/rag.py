"""Chunk retrieval and the confidence-reporting answer step used by the router."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from . import prompts
from .embedding import EmbeddingProvider, VectorIndex
from .errors import AnswerParseError, RecordError
from .llm import TextBackend, complete_with_retry, find_json_object

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 5


@dataclass(frozen=True)
class Chunk:
    id: str
    text: str


@dataclass(frozen=True)
class RagAnswer:
    reasoning: str
    answer: str
    confidence: float

    def to_dict(self) -> dict:
        return {"reasoning": self.reasoning, "answer": self.answer, "confidence": self.confidence}


class ChunkIndex:
    def __init__(self, chunks: list[Chunk], index: VectorIndex, embedder_identity: str):
        self.chunks = {c.id: c for c in chunks}
        self.index = index
        self.embedder_identity = embedder_identity

    def __len__(self) -> int:
        return len(self.chunks)


def _iter_lines(source: str | Path | Iterable[str]) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


def read_chunks(source: str | Path | Iterable[str]) -> list[Chunk]:
    chunks: list[Chunk] = []
    seen: set[str] = set()
    for lineno, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordError(lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise RecordError(lineno, "record must be a JSON object")
        cid, text = rec.get("id"), rec.get("text")
        if not isinstance(cid, str) or not cid:
            raise RecordError(lineno, "field 'id' must be a non-empty string")
        if not isinstance(text, str) or not text.strip():
            raise RecordError(lineno, "field 'text' must be a non-empty string")
        if cid in seen:
            raise RecordError(lineno, f"duplicate chunk id {cid!r}")
        seen.add(cid)
        chunks.append(Chunk(cid, text))
    return chunks


def ingest_chunks(source: str | Path | Iterable[str], embedder: EmbeddingProvider) -> ChunkIndex:
    """Embed every chunk as-is (no re-splitting) and index it by id."""
    chunks = read_chunks(source)
    texts = [c.text for c in chunks]
    if hasattr(embedder, "embed_many") and texts:
        vecs = embedder.embed_many(texts)
    else:
        vecs = [embedder.embed(t) for t in texts]
    index = VectorIndex({c.id: v for c, v in zip(chunks, vecs)})
    return ChunkIndex(chunks, index, embedder.identity)


def retrieve(query: str, k: int, index: ChunkIndex, embedder: EmbeddingProvider) -> list[Chunk]:
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(index) == 0:
        return []
    hits = index.index.top_k_nodes(embedder.embed(query), k)
    return [index.chunks[cid] for cid, _ in hits]


def render_rag_prompt(query: str, chunks: Iterable[Chunk]) -> str:
    context = "\n\n".join(c.text for c in chunks)
    return prompts.render("naive_rag", query=query, context=context)


def _confidence(value) -> float:
    if isinstance(value, bool):
        return 0.0
    if isinstance(value, str):
        try:
            value = float(value.strip())
        except ValueError:
            return 0.0
    if not isinstance(value, (int, float)) or math.isnan(value):
        return 0.0
    if value < 0.0 or value > 1.0:
        logger.warning("confidence %r outside [0, 1]; clamped", value)
    return float(min(1.0, max(0.0, value)))


def parse_rag_response(raw: str) -> RagAnswer:
    """Read the three-field reply. A missing or unreadable confidence
    becomes 0.0, so the router escalates instead of trusting the answer."""
    obj = find_json_object(raw)
    if obj is None:
        raise AnswerParseError("no JSON object in RAG reply", raw)
    ans = obj.get("answer")
    if isinstance(ans, bool) or not isinstance(ans, (str, int, float)):
        raise AnswerParseError("RAG reply lacks an 'answer' field", raw)
    reasoning = obj.get("reasoning", "")
    if not isinstance(reasoning, str):
        reasoning = json.dumps(reasoning)
    if "confidence" not in obj:
        logger.warning("RAG reply has no confidence; using 0.0")
    return RagAnswer(reasoning, str(ans), _confidence(obj.get("confidence")))


def rag_answer(query: str, chunks: Iterable[Chunk], backend: TextBackend) -> RagAnswer:
    return complete_with_retry(backend, render_rag_prompt(query, chunks), parse_rag_response)


class RagPipeline:
    def __init__(self, index: ChunkIndex, embedder: EmbeddingProvider, backend: TextBackend,
                 k: int = DEFAULT_TOP_K):
        self.index = index
        self.embedder = embedder
        self.backend = backend
        self.k = k

    def answer(self, query: str) -> RagAnswer:
        return rag_answer(query, retrieve(query, self.k, self.index, self.embedder), self.backend)

"""Node embeddings, embedding providers and cosine-similarity lookup.

Every argmax in this module breaks ties by ascending id, so results are
reproducible regardless of insertion order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .errors import BackendError, EmbeddingError, MissingEmbeddingError, ZeroVectorError

logger = logging.getLogger(__name__)

DEFAULT_DIM = 64
# exact search below this many vectors when mode="auto"
ANN_MIN_SIZE = 5000


def _as_vector(v: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise EmbeddingError(f"expected a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise EmbeddingError("vector has non-finite entries")
    return arr


def cosine(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    a, b = _as_vector(a), _as_vector(b)
    if a.shape != b.shape:
        raise EmbeddingError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine of a zero-norm vector is undefined")
    c = float(np.dot(a, b)) / (na * nb)
    return max(-1.0, min(1.0, c))


# -- providers ----------------------------------------------------------------


class EmbeddingProvider(Protocol):
    identity: str
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class HashEmbedder:
    """Character n-gram feature hashing, L2-normalized.

    Text is lowercased and each word padded with ``#`` before n-grams are
    taken, so short words still contribute. The empty string (or text with
    no characters after stripping) maps to the zero vector, which the index
    refuses.
    """

    def __init__(self, dim: int = DEFAULT_DIM, ngram_sizes: tuple[int, ...] = (3,)):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.ngram_sizes = tuple(ngram_sizes)
        self.identity = f"hash-ngram-d{dim}-n{'.'.join(map(str, self.ngram_sizes))}"

    def _bucket(self, gram: str) -> int:
        h = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(h, "little") % self.dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for word in text.lower().split():
            padded = f"#{word}#"
            for n in self.ngram_sizes:
                for i in range(max(1, len(padded) - n + 1)):
                    vec[self._bucket(padded[i:i + n])] += 1.0
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec


class FixtureEmbedder:
    """Lookup-table provider; unknown text is an error."""

    def __init__(self, table: Mapping[str, Sequence[float]], identity: str = "fixture"):
        self._table = {k: _as_vector(v) for k, v in table.items()}
        dims = {v.shape[0] for v in self._table.values()}
        if len(dims) > 1:
            raise EmbeddingError(f"fixture vectors have mixed lengths {sorted(dims)}")
        self.dim = dims.pop() if dims else 0
        self.identity = identity

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureEmbedder":
        with open(path, encoding="utf-8") as fh:
            table = json.load(fh)
        return cls(table, identity=f"fixture:{Path(path).name}")

    def embed(self, text: str) -> np.ndarray:
        try:
            return self._table[text].copy()
        except KeyError:
            raise MissingEmbeddingError(text) from None


def fixture_embedder(table: Mapping[str, Sequence[float]]) -> FixtureEmbedder:
    return FixtureEmbedder(table)


class HttpEmbedder:
    """Remote embedding endpoint: POST ``{"input": [...]}`` -> ``{"vectors": [...]}``."""

    def __init__(self, url: str, key: str | None = None, timeout_s: float = 60.0,
                 batch_size: int = 64):
        self.url = url
        self.key = key
        self.timeout_s = timeout_s
        self.batch_size = batch_size
        self.identity = f"http:{url}"
        self.dim = 0

    @classmethod
    def from_env(cls, **kw) -> "HttpEmbedder":
        url = os.environ.get("INSES_EMBED_URL")
        if not url:
            raise BackendError("INSES_EMBED_URL is not set")
        return cls(url, os.environ.get("INSES_EMBED_KEY"), **kw)

    def embed_many(self, texts: Sequence[str]) -> list[np.ndarray]:
        import requests

        headers = {"Authorization": f"Bearer {self.key}"} if self.key else {}
        out: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            batch = list(texts[start:start + self.batch_size])
            try:
                resp = requests.post(self.url, json={"input": batch}, headers=headers,
                                     timeout=self.timeout_s)
                resp.raise_for_status()
                vectors = resp.json()["vectors"]
            except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
                raise BackendError(f"embedding request failed: {exc}") from exc
            if not isinstance(vectors, list) or len(vectors) != len(batch):
                raise BackendError("embedding response has the wrong number of vectors")
            try:
                out.extend(_as_vector(v) for v in vectors)
            except (EmbeddingError, TypeError, ValueError) as exc:
                raise BackendError(f"embedding response holds a malformed vector: {exc}") from exc
        if out:
            self.dim = out[0].shape[0]
        return out

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]


class CachedEmbedder:
    """Wraps a provider with a line-delimited JSON cache keyed by (provider, text)."""

    def __init__(self, inner: EmbeddingProvider, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self.identity = inner.identity
        self._cache: dict[tuple[str, str], np.ndarray] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        self._cache[(rec["provider"], rec["text"])] = _as_vector(rec["vector"])

    @property
    def dim(self) -> int:
        return self.inner.dim

    def embed(self, text: str) -> np.ndarray:
        key = (self.identity, text)
        hit = self._cache.get(key)
        if hit is not None:
            return hit.copy()
        vec = self.inner.embed(text)
        self._cache[key] = vec
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"provider": self.identity, "text": text,
                                 "vector": vec.tolist()}) + "\n")
        return vec


# -- index ----------------------------------------------------------------------


class VectorIndex:
    """Exact cosine index over a fixed set of keyed vectors.

    Keys are sorted at build time, so a stable sort on descending score
    gives ties in ascending key order for free.
    """

    mode = "exact"

    def __init__(self, items: Mapping[str, Sequence[float]] | Iterable[tuple[str, Sequence[float]]]):
        pairs = sorted(dict(items).items())
        self.ids: list[str] = [k for k, _ in pairs]
        self._pos = {k: i for i, k in enumerate(self.ids)}
        if pairs:
            mat = np.vstack([_as_vector(v) for _, v in pairs])
        else:
            mat = np.zeros((0, 0))
        norms = np.linalg.norm(mat, axis=1) if len(pairs) else np.zeros(0)
        zero = [self.ids[i] for i in np.flatnonzero(norms == 0.0)]
        if zero:
            raise ZeroVectorError(f"zero-norm vectors for ids {zero[:5]}")
        self.dim = mat.shape[1] if len(pairs) else 0
        self._unit = mat / norms[:, None] if len(pairs) else mat

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, key: object) -> bool:
        return key in self._pos

    def vector(self, key: str) -> np.ndarray:
        return self._unit[self._pos[key]].copy()

    def _unit_query(self, query: Sequence[float] | np.ndarray) -> np.ndarray:
        q = _as_vector(query)
        if q.shape[0] != self.dim:
            raise EmbeddingError(f"length mismatch: query {q.shape[0]} vs index {self.dim}")
        n = float(np.linalg.norm(q))
        if n == 0.0:
            raise ZeroVectorError("query vector has zero norm")
        return q / n

    def scores(self, query: Sequence[float] | np.ndarray) -> np.ndarray:
        # Row-wise reduction instead of a BLAS product: every row is summed
        # in the same order, so identical vectors get bit-identical scores
        # and the id tie-break is never decided by rounding noise.
        return np.clip((self._unit * self._unit_query(query)).sum(axis=1), -1.0, 1.0)

    def top_k_nodes(self, query, k: int, exclude: Iterable[str] = ()) -> list[tuple[str, float]]:
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self.ids:
            return []
        s = self.scores(query)
        for key in exclude:
            i = self._pos.get(key)
            if i is not None:
                s[i] = -np.inf
        order = np.argsort(-s, kind="stable")
        out = []
        for i in order[:k]:
            if s[i] == -np.inf:
                break
            out.append((self.ids[i], float(s[i])))
        return out

    def nearest_node(self, query, exclude: Iterable[str] = ()) -> tuple[str, float] | None:
        top = self.top_k_nodes(query, 1, exclude)
        return top[0] if top else None


def nearest_node(index, query, exclude: Iterable[str] = ()) -> tuple[str, float] | None:
    return index.nearest_node(query, exclude)


def top_k_nodes(index, query, k: int, exclude: Iterable[str] = ()) -> list[tuple[str, float]]:
    return index.top_k_nodes(query, k, exclude)


def build_index(items: Mapping[str, Sequence[float]], mode: str = "auto", seed: int = 0, **hnsw_kw):
    """Exact index, or the HNSW graph index when ``mode`` asks for it.

    ``auto`` picks exact below ``ANN_MIN_SIZE`` vectors.
    """
    if mode not in ("auto", "exact", "approximate"):
        raise ValueError(f"unknown index mode {mode!r}")
    if mode == "exact" or (mode == "auto" and len(items) < ANN_MIN_SIZE):
        return VectorIndex(items)
    from .hnsw import HNSWIndex

    return HNSWIndex(items, seed=seed, **hnsw_kw)


def embed_graph_nodes(graph, embedder: EmbeddingProvider) -> dict[str, np.ndarray]:
    """phi(v) for every node: the embedding of the node's display name."""
    names = [graph.nodes[n]["name"] for n in graph.nodes]
    if hasattr(embedder, "embed_many"):
        vecs = embedder.embed_many(names)
    else:
        vecs = [embedder.embed(n) for n in names]
    return dict(zip(graph.nodes, vecs))

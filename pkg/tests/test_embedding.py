from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from inses.embedding import (
    CachedEmbedder,
    FixtureEmbedder,
    HashEmbedder,
    HttpEmbedder,
    VectorIndex,
    build_index,
    cosine,
    embed_graph_nodes,
    nearest_node,
    top_k_nodes,
)
from inses.errors import BackendError, EmbeddingError, MissingEmbeddingError, ZeroVectorError
from inses.hnsw import HNSWIndex

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)
vec8 = arrays(np.float64, 8, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3)


def test_cosine_basics():
    assert cosine([1, 0], [1, 0]) == 1.0
    assert cosine([1, 0], [0, 2]) == 0.0
    assert cosine([1, 1], [-1, -1]) == pytest.approx(-1.0)


def test_cosine_errors():
    with pytest.raises(ZeroVectorError):
        cosine([0, 0], [1, 0])
    with pytest.raises(EmbeddingError):
        cosine([1, 0], [1, 0, 0])
    with pytest.raises(EmbeddingError):
        cosine([np.nan, 1], [1, 0])


@settings(max_examples=200)
@given(vec8, vec8)
def test_cosine_symmetric_bounded_scale_invariant(a, b):
    c = cosine(a, b)
    assert -1.0 <= c <= 1.0
    assert c == pytest.approx(cosine(b, a), abs=1e-12)
    assert c == pytest.approx(cosine(3.5 * a, b), abs=1e-9)
    assert cosine(a, a) == pytest.approx(1.0)


def test_hash_embedder_deterministic_and_unit():
    e = HashEmbedder(dim=32)
    v = e.embed("Frederick Douglass")
    assert v.shape == (32,)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert np.array_equal(v, HashEmbedder(dim=32).embed("frederick   douglass"))
    assert e.identity == "hash-ngram-d32-n3"


def test_hash_embedder_similar_strings_score_higher():
    e = HashEmbedder()
    base = e.embed("newspaper publisher")
    assert cosine(base, e.embed("newspaper publishers")) > cosine(base, e.embed("opponent of slavery"))


def test_hash_embedder_empty_text_is_zero_vector():
    v = HashEmbedder(dim=8).embed("   ")
    assert not v.any()
    with pytest.raises(ZeroVectorError):
        VectorIndex({"x": v})


def test_fixture_embedder(tmp_path):
    p = tmp_path / "emb.json"
    p.write_text(json.dumps({"a": [1, 0], "b": [0, 1]}))
    e = FixtureEmbedder.from_file(p)
    assert e.dim == 2 and e.identity == "fixture:emb.json"
    assert list(e.embed("a")) == [1.0, 0.0]
    with pytest.raises(MissingEmbeddingError) as info:
        e.embed("c")
    assert info.value.text == "c"
    with pytest.raises(EmbeddingError):
        FixtureEmbedder({"a": [1, 0], "b": [1, 0, 0]})


def test_cached_embedder_reuses_and_persists(tmp_path):
    calls = []

    class Counting(HashEmbedder):
        def embed(self, text):
            calls.append(text)
            return super().embed(text)

    path = tmp_path / "cache.jsonl"
    c = CachedEmbedder(Counting(dim=8), path)
    v1 = c.embed("paris")
    v2 = c.embed("paris")
    assert calls == ["paris"] and np.array_equal(v1, v2)
    again = CachedEmbedder(Counting(dim=8), path)
    assert np.array_equal(again.embed("paris"), v1)
    assert calls == ["paris"]
    rec = json.loads(path.read_text().splitlines()[0])
    assert rec["provider"] == "hash-ngram-d8-n3" and rec["text"] == "paris"


def test_index_rejects_zero_and_mismatched_queries():
    idx = VectorIndex({"a": [1.0, 0.0], "b": [0.0, 1.0]})
    with pytest.raises(ZeroVectorError):
        idx.nearest_node([0.0, 0.0])
    with pytest.raises(EmbeddingError):
        idx.nearest_node([1.0, 0.0, 0.0])
    with pytest.raises(ZeroVectorError):
        VectorIndex({"a": [0.0, 0.0]})


def test_index_ties_break_on_smaller_id():
    idx = VectorIndex({"b": [1.0, 0.0], "a": [2.0, 0.0], "c": [0.0, 1.0]})
    assert nearest_node(idx, [1.0, 0.0])[0] == "a"
    assert [k for k, _ in top_k_nodes(idx, [1.0, 0.0], 3)] == ["a", "b", "c"]
    assert nearest_node(idx, [1.0, 0.0], exclude=["a"])[0] == "b"


def test_index_empty_and_exhausted():
    assert VectorIndex({}).nearest_node([1.0]) is None
    idx = VectorIndex({"a": [1.0, 0.0]})
    assert idx.nearest_node([1.0, 0.0], exclude=["a"]) is None
    assert idx.top_k_nodes([1.0, 0.0], 5) == [("a", 1.0)]
    with pytest.raises(ValueError):
        idx.top_k_nodes([1.0, 0.0], 0)


def test_identical_vectors_score_identically():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(300, 64))
    X[150:] = X[:150]
    idx = VectorIndex({f"k{i:03d}": x for i, x in enumerate(X)})
    s = idx.scores(rng.normal(size=64))
    for i in range(150):
        assert s[idx._pos[f"k{i:03d}"]] == s[idx._pos[f"k{i + 150:03d}"]]


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.text("abcdef", min_size=1, max_size=3), vec8, min_size=1, max_size=25),
       vec8, st.integers(1, 30))
def test_top_k_matches_oracle(items, q, k):
    idx = VectorIndex(items)
    units = {key: oracles.unit(list(map(float, v))) for key, v in items.items()}
    got = idx.top_k_nodes(q, k)
    want = oracles.top_k(units, list(map(float, q)), k)
    assert [g for g, _ in got] == [w for w, _ in want] or _near_tie(got, want)
    assert all(abs(a - b) < 1e-9 for (_, a), (_, b) in zip(got, want))


def _near_tie(got, want) -> bool:
    """Float noise may reorder two scores that differ by under 1e-12."""
    return all(abs(a - b) < 1e-12 for (_, a), (_, b) in zip(got, want))


def test_build_index_modes():
    items = {f"k{i}": np.eye(4)[i % 4] + 0.01 * i for i in range(10)}
    assert build_index(items).mode == "exact"
    assert build_index(items, mode="approximate").mode == "approximate"
    with pytest.raises(ValueError):
        build_index(items, mode="fuzzy")


def test_embed_graph_nodes_uses_display_names(tiny_graph):
    e = HashEmbedder(dim=8)
    vecs = embed_graph_nodes(tiny_graph, e)
    assert set(vecs) == set(tiny_graph.nodes)
    assert np.array_equal(vecs["paris"], e.embed("Paris"))


# -- HTTP provider against a local server -------------------------------------------


def test_http_embedder_wire_format(http_stub):
    url, seen, set_handler = http_stub
    set_handler(lambda body: (200, {"vectors": [[float(len(t)), 1.0] for t in body["input"]]}))
    e = HttpEmbedder(url, key="secret", batch_size=2)
    out = e.embed_many(["a", "bb", "ccc"])
    assert [list(v) for v in out] == [[1.0, 1.0], [2.0, 1.0], [3.0, 1.0]]
    assert [r["body"] for r in seen] == [{"input": ["a", "bb"]}, {"input": ["ccc"]}]
    assert seen[0]["auth"] == "Bearer secret"
    assert e.dim == 2


@pytest.mark.parametrize("status,payload", [
    (500, {"error": "boom"}),
    (200, {"wrong": []}),
    (200, {"vectors": [[1.0]]}),
    (200, {"vectors": [["x"], ["y"]]}),
    (200, b"not json"),
])
def test_http_embedder_failures_are_backend_errors(http_stub, status, payload):
    url, _, set_handler = http_stub
    set_handler(lambda body: (status, payload))
    with pytest.raises(BackendError):
        HttpEmbedder(url).embed_many(["a", "b"])


def test_http_embedder_unreachable():
    with pytest.raises(BackendError):
        HttpEmbedder("http://127.0.0.1:9/", timeout_s=0.5).embed("a")


def test_http_embedder_from_env(monkeypatch):
    monkeypatch.delenv("INSES_EMBED_URL", raising=False)
    with pytest.raises(BackendError):
        HttpEmbedder.from_env()
    monkeypatch.setenv("INSES_EMBED_URL", "http://example.invalid/")
    monkeypatch.setenv("INSES_EMBED_KEY", "k")
    e = HttpEmbedder.from_env()
    assert e.key == "k" and e.identity == "http:http://example.invalid/"


def test_hnsw_small_index_agrees_with_exact():
    rng = np.random.default_rng(3)
    items = {f"v{i:03d}": rng.normal(size=16) for i in range(300)}
    exact, ann = VectorIndex(items), HNSWIndex(items, seed=1)
    hits = 0
    for _ in range(30):
        q = rng.normal(size=16)
        hits += len({k for k, _ in ann.top_k_nodes(q, 5)} & {k for k, _ in exact.top_k_nodes(q, 5)})
    assert hits / 150 >= 0.95


def test_hnsw_exclude_and_determinism():
    rng = np.random.default_rng(4)
    items = {f"v{i:03d}": rng.normal(size=8) for i in range(200)}
    a, b = HNSWIndex(items, seed=5), HNSWIndex(items, seed=5)
    q = items["v007"]
    assert a.top_k_nodes(q, 5) == b.top_k_nodes(q, 5)
    assert a.nearest_node(q)[0] == "v007"
    assert "v007" not in {k for k, _ in a.top_k_nodes(q, 10, exclude=["v007"])}

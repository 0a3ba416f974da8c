from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from inses import case_study
from inses.embedding import VectorIndex
from inses.kg_store import PropertyGraph, ingest_triples

sys.path.insert(0, str(Path(__file__).parent))

GOLDEN_DIR = Path(__file__).parent / "golden"


@dataclass
class RandomGraph:
    graph: PropertyGraph
    vectors: dict[str, np.ndarray]
    index: VectorIndex


def random_graph(rng: np.random.Generator, max_nodes: int = 500, max_edges: int = 1500,
                 dim: int = 64, dup_frac: float = 0.1) -> RandomGraph:
    """Random names, random directed edges, Gaussian embeddings with a share
    of exact duplicate vectors so score ties actually occur."""

    n = int(rng.integers(2, max_nodes + 1))
    m = int(rng.integers(1, max_edges + 1))
    names = [f"N{i:04d}" for i in rng.permutation(n)]
    rels = ["r0", "r1", "r2"]
    lines = []
    for _ in range(m):
        h, t = rng.integers(0, n, size=2)
        lines.append(json.dumps({"head": names[h], "relation": rels[int(rng.integers(0, 3))],
                                 "tail": names[t]}))
    graph = ingest_triples(lines, embedding_dim=dim)
    ids = graph.node_ids()
    X = rng.normal(size=(len(ids), dim))
    for _ in range(int(dup_frac * len(ids))):
        a, b = rng.integers(0, len(ids), size=2)
        X[b] = X[a]
    vectors = {k: X[i] for i, k in enumerate(ids)}
    return RandomGraph(graph, vectors, VectorIndex(vectors))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cs_graph():
    return case_study.load_graph()


@pytest.fixture(scope="session")
def cs_embedder():
    return case_study.load_embedder()


@pytest.fixture(scope="session")
def cs_index(cs_graph, cs_embedder):
    return case_study.load_index(cs_graph, cs_embedder)


@pytest.fixture
def tiny_graph():
    lines = [
        '{"head": "France", "relation": "Capital", "tail": "Paris", "source_text": "Paris is the capital of France."}',
        '{"head": "Seine", "relation": "Flows through", "tail": "Paris"}',
        '{"head": "Paris", "relation": "Twinned with", "tail": "Rome"}',
        '{"head": "Rome", "relation": "Capital of", "tail": "Italy"}',
    ]
    return ingest_triples(lines, embedding_dim=8)


def pytest_terminal_summary(terminalreporter):
    from _gate import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])


@pytest.fixture
def http_stub():
    """Local HTTP server; ``respond(body_dict) -> (status, payload)`` decides each reply.

    Yields ``(url, requests_seen, set_handler)``.
    """
    import threading
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    seen: list[dict] = []
    state = {"handler": lambda body: (200, {})}

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length) or b"{}")
            seen.append({"body": body, "auth": self.headers.get("Authorization")})
            status, payload = state["handler"](body)
            data = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()

    def set_handler(fn):
        state["handler"] = fn

    try:
        yield f"http://127.0.0.1:{server.server_address[1]}/", seen, set_handler
    finally:
        server.shutdown()
        server.server_close()

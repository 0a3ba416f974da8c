"""Loaders for the bundled Frederick Douglass case-study fixture.

The fixture pairs a small graph with constructed embeddings and two
navigator scripts: one that replays the run without similarity expansion
(which never reaches the answer) and one that replays the full run.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .embedding import FixtureEmbedder, VectorIndex, embed_graph_nodes
from .kg_store import PropertyGraph, ingest_triples
from .navigator import ScriptedNavigator, load_script

QUERY = ("Who was the spouse of a leading speaker against slavery and publisher "
         "of an antislavery newspaper?")
ENTITIES = ("leading speaker against slavery", "antislavery newspaper", "spouse", "publisher")
ANSWER_TRIPLE = ("helen pitts douglass", "Is", "second wife of frederick douglass")


def fixture_dir() -> Path:
    return Path(str(resources.files("inses").joinpath("data").joinpath("case_study")))


def triples_path() -> Path:
    return fixture_dir() / "triples.jsonl"


def embeddings_path() -> Path:
    return fixture_dir() / "embeddings.json"


def script_path(expansion: bool) -> Path:
    return fixture_dir() / ("script_with_expansion.json" if expansion else "script_no_expansion.json")


def load_embedder() -> FixtureEmbedder:
    return FixtureEmbedder.from_file(embeddings_path())


def load_graph() -> PropertyGraph:
    emb = load_embedder()
    return ingest_triples(triples_path(), embedding_dim=emb.dim)


def load_index(graph: PropertyGraph | None = None, embedder: FixtureEmbedder | None = None) -> VectorIndex:
    graph = graph or load_graph()
    embedder = embedder or load_embedder()
    return VectorIndex(embed_graph_nodes(graph, embedder))


def load_navigator(expansion: bool) -> ScriptedNavigator:
    steps, _ = load_script(script_path(expansion))
    return ScriptedNavigator(steps)

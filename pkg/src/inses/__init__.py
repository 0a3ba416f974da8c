"""Knowledge-graph search that pairs navigator-guided traversal with
embedding-similarity frontier expansion, plus a router that sends simple
queries to chunk retrieval instead."""

from .kg_store import PropertyGraph, Triple, adjacent_triples, graph_stats, ingest_triples
from .search import SearchConfig, StopReason, run_search

__all__ = [
    "PropertyGraph",
    "SearchConfig",
    "StopReason",
    "Triple",
    "adjacent_triples",
    "graph_stats",
    "ingest_triples",
    "run_search",
]
__version__ = "0.1.0"

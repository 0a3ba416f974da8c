"""Property-graph storage for knowledge triples.

Nodes are keyed by a canonical form of their name (lowercase, whitespace
collapsed); the first surface form seen is kept in the ``name`` attribute.
Edges are stored directed, but adjacency lookups treat an edge as incident
to both of its endpoints.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import FormatVersionError, RecordError, UnknownNodeError

logger = logging.getLogger(__name__)

FORMAT_NAME = "inses-graph"
FORMAT_VERSION = 1
DEFAULT_EMBEDDING_DIM = 64

NodeId = str

_WS = re.compile(r"\s+")


def canonical_key(name: str) -> NodeId:
    return _WS.sub(" ", name).strip().lower()


@dataclass(frozen=True, order=True)
class Triple:
    head: NodeId
    relation: str
    tail: NodeId
    source_text: str | None = None

    def endpoints(self) -> tuple[NodeId, NodeId]:
        return (self.head, self.tail)

    def to_dict(self) -> dict:
        d = {"head": self.head, "relation": self.relation, "tail": self.tail}
        if self.source_text is not None:
            d["source_text"] = self.source_text
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Triple":
        return cls(d["head"], d["relation"], d["tail"], d.get("source_text"))


@dataclass
class PropertyGraph:
    """Nodes with attribute maps plus directed, attributed edges.

    One ``Triple`` per edge; parallel edges between the same pair are fine
    as long as they differ in relation or source text.
    """

    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    nodes: dict[NodeId, dict[str, str]] = field(default_factory=dict)
    edges: list[Triple] = field(default_factory=list)
    _edge_set: set[Triple] = field(default_factory=set, repr=False)
    _incident: dict[NodeId, list[int]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.embedding_dim <= 0:
            raise ValueError("embedding_dim must be positive")

    # -- construction (ingest/load only) -----------------------------------

    def _add_node(self, name: str, attrs: dict[str, str] | None = None) -> NodeId:
        key = canonical_key(name)
        node = self.nodes.get(key)
        if node is None:
            node = {"name": _WS.sub(" ", name).strip()}
            self.nodes[key] = node
            self._incident[key] = []
        for k, v in (attrs or {}).items():
            # first value wins on conflict; later records only fill gaps
            node.setdefault(k, v)
        return key

    def _add_edge(self, triple: Triple) -> bool:
        if triple in self._edge_set:
            return False
        idx = len(self.edges)
        self.edges.append(triple)
        self._edge_set.add(triple)
        self._incident[triple.head].append(idx)
        if triple.tail != triple.head:
            self._incident[triple.tail].append(idx)
        return True

    # -- queries ------------------------------------------------------------

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.nodes

    def name(self, node_id: NodeId) -> str:
        try:
            return self.nodes[node_id]["name"]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def triples(self) -> list[Triple]:
        return list(self.edges)

    def node_ids(self) -> list[NodeId]:
        return list(self.nodes)

    def render_triple(self, t: Triple) -> str:
        return f"{self.name(t.head)} → {t.relation} → {self.name(t.tail)}"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PropertyGraph):
            return NotImplemented
        return (
            self.embedding_dim == other.embedding_dim
            and self.nodes == other.nodes
            and self.edges == other.edges
        )


def _parse_record(line: str, lineno: int) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordError(lineno, f"invalid JSON ({exc.msg})") from None
    if not isinstance(rec, dict):
        raise RecordError(lineno, "record must be a JSON object")
    for key in ("head", "relation", "tail"):
        val = rec.get(key)
        if not isinstance(val, str) or not val.strip():
            raise RecordError(lineno, f"field {key!r} must be a non-empty string")
    for key in ("head_attrs", "tail_attrs"):
        attrs = rec.get(key)
        if attrs is None:
            continue
        if not isinstance(attrs, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in attrs.items()
        ):
            raise RecordError(lineno, f"field {key!r} must map strings to strings")
    src = rec.get("source_text")
    if src is not None and not isinstance(src, str):
        raise RecordError(lineno, "field 'source_text' must be a string")
    return rec


def _iter_lines(source: str | Path | Iterable[str]) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


def _ingest_into(graph: PropertyGraph, lines: Iterable[str], first_lineno: int = 1) -> None:
    for lineno, line in enumerate(lines, start=first_lineno):
        if not line.strip():
            continue
        rec = _parse_record(line, lineno)
        head = graph._add_node(rec["head"], rec.get("head_attrs"))
        tail = graph._add_node(rec["tail"], rec.get("tail_attrs"))
        triple = Triple(head, rec["relation"].strip(), tail, rec.get("source_text"))
        graph._add_edge(triple)


def ingest_triples(
    source: str | Path | Iterable[str], embedding_dim: int = DEFAULT_EMBEDDING_DIM
) -> PropertyGraph:
    """Build a graph from line-delimited JSON triple records.

    ``source`` is a path or any iterable of lines. Blank lines are skipped;
    exact duplicate records collapse into one edge.
    """
    graph = PropertyGraph(embedding_dim=embedding_dim)
    _ingest_into(graph, _iter_lines(source))
    logger.info("ingested %d nodes, %d edges", len(graph.nodes), len(graph.edges))
    return graph


def adjacent_triples(graph: PropertyGraph, nodes: Iterable[NodeId]) -> list[Triple]:
    """Every triple with at least one endpoint in ``nodes``, in edge order."""
    idx: set[int] = set()
    for n in nodes:
        try:
            idx.update(graph._incident[n])
        except KeyError:
            raise UnknownNodeError(n) from None
    return [graph.edges[i] for i in sorted(idx)]


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    average_degree: float

    def to_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "edge_count": self.edge_count,
            "average_degree": self.average_degree,
        }


def degree_from_counts(node_count: int, edge_count: int) -> float:
    return 2.0 * edge_count / node_count if node_count else 0.0


def graph_stats(graph: PropertyGraph) -> GraphStats:
    n, m = len(graph.nodes), len(graph.edges)
    return GraphStats(n, m, degree_from_counts(n, m))


def save(graph: PropertyGraph, path: str | Path) -> None:
    """Write the graph as a header line followed by one triple record per edge.

    Each record repeats the full attribute maps of both endpoints so a
    plain re-ingest of the body reproduces the graph.
    """
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": FORMAT_NAME, "version": FORMAT_VERSION,
                  "embedding_dim": graph.embedding_dim}
        fh.write(json.dumps(header) + "\n")
        for t in graph.edges:
            h, tl = graph.nodes[t.head], graph.nodes[t.tail]
            rec = {
                "head": h["name"],
                "relation": t.relation,
                "tail": tl["name"],
                "head_attrs": {k: v for k, v in h.items() if k != "name"},
                "tail_attrs": {k: v for k, v in tl.items() if k != "name"},
            }
            if t.source_text is not None:
                rec["source_text"] = t.source_text
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load(path: str | Path) -> PropertyGraph:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError:
            raise FormatVersionError(f"{path}: missing graph header") from None
        if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
            raise FormatVersionError(f"{path}: not a saved graph file")
        if header.get("version") != FORMAT_VERSION:
            raise FormatVersionError(
                f"{path}: format version {header.get('version')!r}, expected {FORMAT_VERSION}"
            )
        graph = PropertyGraph(embedding_dim=int(header["embedding_dim"]))
        _ingest_into(graph, fh, first_lineno=2)
    return graph

"""Bounded iterative graph search with similarity expansion.

Each iteration marks the frontier visited, collects the triples incident to
it, asks the navigator which of them help, and then grows the next
frontier from two sources: unvisited endpoints of the selected triples,
and each frontier node's nearest embedding neighbor when that neighbor is
similar enough. The loop stops when the navigator declares the evidence
sufficient, the frontier empties, or the iteration cap is reached.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import prompts
from .embedding import EmbeddingProvider, VectorIndex
from .errors import AnswerParseError, InsesError, NoAnchorEntitiesError, SearchError
from .kg_store import NodeId, PropertyGraph, Triple, adjacent_triples
from .llm import TextBackend, complete_with_retry, find_json_object
from .navigator import ExtractionResult, Navigator, NavigatorContext, make_decision

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchConfig:
    max_iter: int = 6
    # no canonical value; a tuning knob, see README
    tau_sim: float = 0.80
    expansion_per_node: int = 1
    max_select_per_step: int = 8
    entity_anchor_floor: float | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if not 0.0 <= self.tau_sim <= 1.0:
            raise ValueError("tau_sim must lie in [0, 1]")
        if self.expansion_per_node < 1:
            raise ValueError("expansion_per_node must be a positive integer")
        if self.max_select_per_step < 1:
            raise ValueError("max_select_per_step must be a positive integer")

    def to_dict(self) -> dict:
        return {
            "max_iter": self.max_iter,
            "tau_sim": self.tau_sim,
            "expansion_per_node": self.expansion_per_node,
            "max_select_per_step": self.max_select_per_step,
            "entity_anchor_floor": self.entity_anchor_floor,
        }


class StopReason(str, Enum):
    SUFFICIENT = "sufficient"
    MAX_ITER = "max_iter"
    EMPTY_FRONTIER = "empty_frontier"


@dataclass
class SearchState:
    frontier: list[NodeId]
    visited: list[NodeId] = field(default_factory=list)
    evidence: list[Triple] = field(default_factory=list)
    iteration: int = 0
    stop_reason: StopReason | None = None


@dataclass(frozen=True)
class TraceRecord:
    """One executed iteration. ``sim`` and ``next_frontier`` are None when
    the navigator stopped the search before expansion."""

    iteration: int
    frontier: tuple[NodeId, ...]
    visited: tuple[NodeId, ...]
    adjacent_count: int
    sufficient: bool
    selected: tuple[Triple, ...]
    candidates: tuple[NodeId, ...]
    sim: tuple[NodeId, ...] | None
    next_frontier: tuple[NodeId, ...] | None

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "frontier": list(self.frontier),
            "visited": list(self.visited),
            "adjacent_count": self.adjacent_count,
            "sufficient": self.sufficient,
            "selected": [t.to_dict() for t in self.selected],
            "candidates": list(self.candidates),
            "sim": None if self.sim is None else list(self.sim),
            "next_frontier": None if self.next_frontier is None else list(self.next_frontier),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceRecord":
        opt = lambda v: None if v is None else tuple(v)  # noqa: E731
        return cls(
            d["iteration"], tuple(d["frontier"]), tuple(d["visited"]), d["adjacent_count"],
            d["sufficient"], tuple(Triple.from_dict(t) for t in d["selected"]),
            tuple(d["candidates"]), opt(d["sim"]), opt(d["next_frontier"]),
        )


def write_trace(trace: Sequence[TraceRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in trace:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")


def read_trace(path: str | Path) -> list[TraceRecord]:
    with open(path, encoding="utf-8") as fh:
        return [TraceRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


@dataclass
class SearchResult:
    evidence: list[Triple]
    trace: list[TraceRecord]
    stop_reason: StopReason
    entities: tuple[str, ...] = ()
    initial: tuple[NodeId, ...] = ()


Extractor = Callable[[str], ExtractionResult]


def initial_nodes(
    query: str,
    extractor: Extractor,
    index: VectorIndex,
    embedder: EmbeddingProvider,
    config: SearchConfig = SearchConfig(),
) -> list[NodeId]:
    """Anchor each extracted mention to its most similar node."""
    return _anchor(extractor(query).entities, index, embedder, config)


def _anchor(mentions: Sequence[str], index, embedder, config: SearchConfig) -> list[NodeId]:
    if not mentions:
        raise NoAnchorEntitiesError("no anchor entities extracted from the query")
    if len(index) == 0:
        raise NoAnchorEntitiesError("the node index is empty")
    out: dict[NodeId, None] = {}
    for m in mentions:
        vec = embedder.embed(m)
        if not vec.any():
            logger.warning("mention %r embeds to the zero vector; skipped", m)
            continue
        hit = index.nearest_node(vec)
        if hit is None:
            continue
        node, score = hit
        if config.entity_anchor_floor is not None and score < config.entity_anchor_floor:
            logger.info("mention %r best score %.3f under floor; dropped", m, score)
            continue
        out[node] = None
    return list(out)


def similarity_expansion(frontier: Iterable[NodeId], index, config: SearchConfig = SearchConfig()) -> list[NodeId]:
    """For each frontier node, its top ``expansion_per_node`` neighbors in
    embedding space (itself excluded) scoring at least ``tau_sim``."""
    out: dict[NodeId, None] = {}
    for u in frontier:
        for v, score in index.top_k_nodes(index.vector(u), config.expansion_per_node, exclude=(u,)):
            if score >= config.tau_sim:
                out[v] = None
    return list(out)


def update_frontier(candidates: Iterable[NodeId], sim: Iterable[NodeId], visited: Iterable[NodeId]) -> list[NodeId]:
    seen = set(visited)
    return [n for n in dict.fromkeys([*candidates, *sim]) if n not in seen]


def run_search(
    graph: PropertyGraph,
    index,
    navigator: Navigator,
    extractor: Extractor,
    embedder: EmbeddingProvider,
    config: SearchConfig = SearchConfig(),
    query: str = "",
) -> SearchResult:
    """Run the navigate/expand loop for ``query`` and return its evidence.

    Navigator failures abort with ``SearchError``, which keeps the partial
    evidence and trace.
    """
    entities = extractor(query).entities
    frontier = _anchor(entities, index, embedder, config)
    return search_from(graph, index, navigator, frontier, config, query, entities)


def search_from(
    graph: PropertyGraph,
    index,
    navigator: Navigator,
    frontier: Sequence[NodeId],
    config: SearchConfig,
    query: str,
    entities: tuple[str, ...] = (),
) -> SearchResult:
    state = SearchState(frontier=list(frontier))
    initial = tuple(frontier)
    trace: list[TraceRecord] = []
    evidence: dict[Triple, None] = {}
    visited: dict[NodeId, None] = {}
    names = {n: a["name"] for n, a in graph.nodes.items()}

    while state.iteration < config.max_iter and state.frontier:
        earlier = list(visited)
        visited.update(dict.fromkeys(state.frontier))
        adj = adjacent_triples(graph, state.frontier)
        ctx = NavigatorContext(
            query=query,
            visited_nodes=[(n, names[n]) for n in earlier],
            selected_so_far=list(evidence),
            frontier_nodes=[(n, names[n]) for n in state.frontier],
            adjacent=adj,
            names=names,
        )
        try:
            decision = navigator.decide(ctx)
        except InsesError as exc:
            raise SearchError(
                f"navigator failed at iteration {state.iteration}: {exc}",
                list(evidence), trace, exc,
            ) from exc
        if len(decision.selected) > config.max_select_per_step:
            decision = make_decision(ctx, decision.sufficient,
                                     decision.selected[: config.max_select_per_step])
        evidence.update(dict.fromkeys(decision.selected))

        if decision.sufficient:
            trace.append(TraceRecord(
                state.iteration, tuple(state.frontier), tuple(visited), len(adj), True,
                decision.selected, decision.candidates, None, None,
            ))
            state.stop_reason = StopReason.SUFFICIENT
            break

        sim = similarity_expansion(state.frontier, index, config)
        nxt = update_frontier(decision.candidates, sim, visited)
        trace.append(TraceRecord(
            state.iteration, tuple(state.frontier), tuple(visited), len(adj), False,
            decision.selected, decision.candidates, tuple(sim), tuple(nxt),
        ))
        state.frontier = nxt
        state.iteration += 1

    if state.stop_reason is None:
        state.stop_reason = StopReason.EMPTY_FRONTIER if not state.frontier else StopReason.MAX_ITER
    state.visited = list(visited)
    state.evidence = list(evidence)
    return SearchResult(state.evidence, trace, state.stop_reason, tuple(entities), initial)


# -- answering ----------------------------------------------------------------------


def evidence_context(graph: PropertyGraph, evidence: Iterable[Triple]) -> str:
    lines = []
    for t in evidence:
        line = graph.render_triple(t)
        if t.source_text:
            line += f" | source text: {t.source_text}"
        lines.append(line)
    return "\n".join(lines)


def parse_answer(raw: str) -> dict:
    obj = find_json_object(raw)
    if obj is None or not isinstance(obj.get("answer"), (str, int, float)) or isinstance(obj.get("answer"), bool):
        raise AnswerParseError("reply lacks a JSON 'answer' field", raw)
    reasoning = obj.get("reasoning", "")
    return {"reasoning": reasoning if isinstance(reasoning, str) else json.dumps(reasoning),
            "answer": str(obj["answer"])}


def render_answer_prompt(query: str, context: str) -> str:
    return prompts.render("answer_with_triples", query=query, context=context)


def answer_from_evidence(query: str, evidence: Iterable[Triple], backend: TextBackend,
                         graph: PropertyGraph) -> dict:
    prompt = render_answer_prompt(query, evidence_context(graph, evidence))
    return complete_with_retry(backend, prompt, parse_answer)


class InsesPipeline:
    """Search plus (optionally) answer generation, as one callable unit.

    ``navigator_factory`` is called once per query so stateful navigators
    (the scripted one) never leak between queries.
    """

    def __init__(self, graph: PropertyGraph, index, navigator_factory: Callable[[], Navigator],
                 extractor: Extractor, embedder: EmbeddingProvider,
                 config: SearchConfig = SearchConfig(), answer_backend: TextBackend | None = None):
        self.graph = graph
        self.index = index
        self.navigator_factory = navigator_factory
        self.extractor = extractor
        self.embedder = embedder
        self.config = config
        self.answer_backend = answer_backend

    def search(self, query: str) -> SearchResult:
        return run_search(self.graph, self.index, self.navigator_factory(), self.extractor,
                          self.embedder, self.config, query=query)

    def answer(self, query: str) -> dict:
        result = self.search(query)
        payload = {
            "pipeline": "inses",
            "evidence": [self.graph.render_triple(t) for t in result.evidence],
            "context": evidence_context(self.graph, result.evidence),
            "stop_reason": result.stop_reason.value,
            "iterations": len(result.trace),
            "trace": [r.to_dict() for r in result.trace],
            "answer": None,
            "reasoning": None,
        }
        if self.answer_backend is not None:
            payload.update(answer_from_evidence(query, result.evidence, self.answer_backend, self.graph))
        return payload

"""Dispatch between chunk retrieval and graph search.

Queries judged to need three or more hops go straight to graph search.
Everything else is tried with retrieval first and escalated when the
reported confidence does not strictly exceed the threshold.
"""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Protocol

from . import prompts
from .errors import BackendError, InsesError, RouteError
from .llm import TextBackend

logger = logging.getLogger(__name__)


class Route(str, Enum):
    RAG = "rag"
    INSES = "inses"


class Cause(str, Enum):
    SIMPLE_HIGH_CONFIDENCE = "classified_simple_high_confidence"
    SIMPLE_LOW_CONFIDENCE_ESCALATED = "classified_simple_low_confidence_escalated"
    MULTIHOP = "classified_multihop"


@dataclass(frozen=True)
class RouteDecision:
    route: Route
    cause: Cause
    rag_confidence: float | None = None

    def __post_init__(self):
        if (self.route is Route.RAG) != (self.cause is Cause.SIMPLE_HIGH_CONFIDENCE):
            raise ValueError(f"cause {self.cause.value} inconsistent with route {self.route.value}")
        if (self.rag_confidence is None) != (self.cause is Cause.MULTIHOP):
            raise ValueError("rag_confidence must be present exactly when RAG was attempted")

    def to_dict(self) -> dict:
        return {"route": self.route.value, "cause": self.cause.value,
                "rag_confidence": self.rag_confidence}

    @classmethod
    def from_dict(cls, d: dict) -> "RouteDecision":
        return cls(Route(d["route"]), Cause(d["cause"]), d.get("rag_confidence"))


class HopClassifier(Protocol):
    def __call__(self, query: str) -> bool: ...


_WORD = re.compile(r"[a-z]+")
# relational connectors; each one usually chains one more entity
_MARKERS = frozenset({"of", "and", "whose", "which", "that", "who", "whom", "where", "when", "by"})


class HeuristicClassifier:
    """Estimates hops as 1 + the number of connector words after the
    leading question word, and calls the query multi-hop at ``min_hops``."""

    def __init__(self, min_hops: int = 3):
        self.min_hops = min_hops

    def hops(self, query: str) -> int:
        words = _WORD.findall(query.lower())
        return 1 + sum(1 for w in words[1:] if w in _MARKERS)

    def __call__(self, query: str) -> bool:
        return self.hops(query) >= self.min_hops


def parse_yes_no(raw: str) -> bool | None:
    m = re.match(r"\s*[\"'*]*\s*(yes|no)\b", raw, re.IGNORECASE)
    return None if m is None else m.group(1).lower() == "yes"


class LLMClassifier:
    """Yes/no prompt; transport failures and unreadable replies escalate."""

    def __init__(self, backend: TextBackend):
        self.backend = backend

    def __call__(self, query: str) -> bool:
        try:
            raw = self.backend.complete(prompts.render("classify_multihop", query=query))
        except BackendError as exc:
            logger.warning("hop classifier failed (%s); treating query as multi-hop", exc)
            return True
        verdict = parse_yes_no(raw)
        if verdict is None:
            logger.warning("hop classifier reply %r unreadable; treating query as multi-hop", raw[:80])
            return True
        return verdict


def classify_multihop(query: str, classifier: HopClassifier) -> bool:
    return bool(classifier(query))


@dataclass(frozen=True)
class RouterConfig:
    # no canonical value; a tuning knob, see README
    confidence_threshold: float = 0.70
    classifier: HopClassifier = HeuristicClassifier()

    def __post_init__(self):
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must lie in [0, 1]")


def route_query(query: str, rag_pipeline, inses_pipeline, config: RouterConfig = RouterConfig()):
    """Return ``(payload, RouteDecision)``.

    ``rag_pipeline.answer`` returns a ``RagAnswer``; ``inses_pipeline.answer``
    returns a dict payload. Pipeline failures surface as ``RouteError``
    tagged with the route that failed.
    """
    if classify_multihop(query, config.classifier):
        decision = RouteDecision(Route.INSES, Cause.MULTIHOP)
        return _run_inses(query, inses_pipeline, decision), decision
    try:
        rag = rag_pipeline.answer(query)
    except InsesError as exc:
        raise RouteError(Route.RAG.value, exc) from exc
    if rag.confidence > config.confidence_threshold:
        decision = RouteDecision(Route.RAG, Cause.SIMPLE_HIGH_CONFIDENCE, rag.confidence)
        payload = {"pipeline": "rag", **rag.to_dict()}
        return payload, decision
    decision = RouteDecision(Route.INSES, Cause.SIMPLE_LOW_CONFIDENCE_ESCALATED, rag.confidence)
    return _run_inses(query, inses_pipeline, decision), decision


def _run_inses(query: str, pipeline, decision: RouteDecision) -> dict:
    try:
        return pipeline.answer(query)
    except InsesError as exc:
        raise RouteError(Route.INSES.value, exc) from exc


@dataclass(frozen=True)
class RoutingStats:
    rag_share: float
    inses_share: float
    escalation_rate: float

    def to_dict(self) -> dict:
        return {"rag_share": self.rag_share, "inses_share": self.inses_share,
                "escalation_rate": self.escalation_rate}


def routing_stats(decisions: Iterable[RouteDecision]) -> RoutingStats:
    counts = Counter(d.cause for d in decisions)
    n = sum(counts.values())
    if n == 0:
        return RoutingStats(0.0, 0.0, 0.0)
    rag = counts[Cause.SIMPLE_HIGH_CONFIDENCE]
    escalated = counts[Cause.SIMPLE_LOW_CONFIDENCE_ESCALATED]
    simple = rag + escalated
    return RoutingStats(rag / n, (n - rag) / n, escalated / simple if simple else 0.0)

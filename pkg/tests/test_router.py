from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from inses import case_study as cs
from inses.errors import BackendError, RouteError
from inses.llm import ScriptedBackend
from inses.rag import RagAnswer
from inses.router import (
    Cause,
    HeuristicClassifier,
    LLMClassifier,
    Route,
    RouteDecision,
    RouterConfig,
    parse_yes_no,
    route_query,
    routing_stats,
)


class FixedRag:
    def __init__(self, confidence=None, error=None):
        self.confidence, self.error, self.calls = confidence, error, 0

    def answer(self, query):
        self.calls += 1
        if self.error:
            raise self.error
        return RagAnswer("r", "rag answer", self.confidence)


class FixedInses:
    def __init__(self, error=None):
        self.error, self.calls = error, 0

    def answer(self, query):
        self.calls += 1
        if self.error:
            raise self.error
        return {"pipeline": "inses", "answer": "graph answer"}


def test_heuristic_examples():
    h = HeuristicClassifier()
    assert not h("What is the capital of France?")
    assert h(cs.QUERY)
    assert h.hops("Of what is the capital?") == 1  # the leading word does not count


def test_parse_yes_no():
    assert parse_yes_no("Yes.") is True
    assert parse_yes_no(' "no" because') is False
    assert parse_yes_no("**YES**") is True
    assert parse_yes_no("yesterday") is None
    assert parse_yes_no("maybe") is None


def test_llm_classifier_escalates_on_failure():
    assert LLMClassifier(ScriptedBackend(["no"]))("q") is False
    assert LLMClassifier(ScriptedBackend(["yes"]))("q") is True
    assert LLMClassifier(ScriptedBackend(["I cannot say"]))("q") is True
    assert LLMClassifier(ScriptedBackend([]))("q") is True  # exhausted backend raises BackendError


def test_llm_classifier_prompt_mentions_query():
    b = ScriptedBackend(["no"])
    LLMClassifier(b)("Who wrote Emma?")
    assert "Who wrote Emma?" in b.prompts[0]


def test_multihop_skips_rag():
    rag, inses = FixedRag(0.99), FixedInses()
    payload, d = route_query("q", rag, inses, RouterConfig(classifier=lambda q: True))
    assert d == RouteDecision(Route.INSES, Cause.MULTIHOP) and rag.calls == 0
    assert payload["answer"] == "graph answer"


@pytest.mark.parametrize("conf,route", [(0.71, Route.RAG), (0.70, Route.INSES), (0.0, Route.INSES)])
def test_threshold_is_strict(conf, route):
    payload, d = route_query("q", FixedRag(conf), FixedInses(), RouterConfig(classifier=lambda q: False))
    assert d.route is route and d.rag_confidence == conf
    if route is Route.RAG:
        assert payload == {"pipeline": "rag", "reasoning": "r", "answer": "rag answer", "confidence": conf}


def test_route_errors_carry_the_failed_route():
    simple = RouterConfig(classifier=lambda q: False)
    with pytest.raises(RouteError) as info:
        route_query("q", FixedRag(error=BackendError("down")), FixedInses(), simple)
    assert info.value.route == "rag" and isinstance(info.value.cause, BackendError)
    with pytest.raises(RouteError) as info:
        route_query("q", FixedRag(0.1), FixedInses(error=BackendError("down")), simple)
    assert info.value.route == "inses"


def test_decision_validation_and_roundtrip():
    with pytest.raises(ValueError):
        RouteDecision(Route.RAG, Cause.MULTIHOP)
    with pytest.raises(ValueError):
        RouteDecision(Route.INSES, Cause.MULTIHOP, 0.5)
    with pytest.raises(ValueError):
        RouteDecision(Route.INSES, Cause.SIMPLE_LOW_CONFIDENCE_ESCALATED)
    d = RouteDecision(Route.INSES, Cause.SIMPLE_LOW_CONFIDENCE_ESCALATED, 0.3)
    assert RouteDecision.from_dict(d.to_dict()) == d
    with pytest.raises(ValueError):
        RouterConfig(confidence_threshold=1.5)


def test_routing_stats_empty_and_mixed():
    assert routing_stats([]).to_dict() == {"rag_share": 0.0, "inses_share": 0.0, "escalation_rate": 0.0}
    ds = ([RouteDecision(Route.RAG, Cause.SIMPLE_HIGH_CONFIDENCE, 0.9)] * 3
          + [RouteDecision(Route.INSES, Cause.SIMPLE_LOW_CONFIDENCE_ESCALATED, 0.2)]
          + [RouteDecision(Route.INSES, Cause.MULTIHOP)] * 4)
    s = routing_stats(ds)
    assert (s.rag_share, s.inses_share, s.escalation_rate) == (3 / 8, 5 / 8, 1 / 4)


@given(st.lists(st.sampled_from(list(Cause)), max_size=50))
def test_shares_sum_to_one(causes):
    ds = [RouteDecision(Route.RAG if c is Cause.SIMPLE_HIGH_CONFIDENCE else Route.INSES, c,
                        None if c is Cause.MULTIHOP else 0.5) for c in causes]
    s = routing_stats(ds)
    if causes:
        assert s.rag_share + s.inses_share == pytest.approx(1.0)
    assert 0.0 <= s.escalation_rate <= 1.0

"""Triple selection and sufficiency judgment for one search step.

A navigator receives a ``NavigatorContext`` (query, visited nodes, evidence
so far, the current frontier and its numbered adjacent triples) and
returns a ``NavigatorDecision``. Three implementations share that
contract: an LLM-backed one driven by the navigation prompt, a
deterministic token-overlap one, and a scripted one that replays a fixed
trace.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from . import prompts
from .errors import DataError, NavigationParseError, ScriptExhaustedError
from .kg_store import NodeId, Triple, canonical_key
from .llm import TextBackend, complete_with_retry, find_json_object

logger = logging.getLogger(__name__)

STOPWORDS = frozenset("""
a an the and or but if of to in on at by for with from as into about over
is was are were be been being has have had do does did
who whom whose what which when where why how that this these those it its
so than
""".split())
assert len(STOPWORDS) == 50

_TOKEN = re.compile(r"[a-z0-9]+")
_DIGITS = re.compile(r"[0-9]{1,9}")


def content_tokens(text: str) -> list[str]:
    return [t for t in _TOKEN.findall(text.lower()) if t not in STOPWORDS]


@dataclass
class NavigatorContext:
    query: str
    visited_nodes: list[tuple[NodeId, str]] = field(default_factory=list)
    selected_so_far: list[Triple] = field(default_factory=list)
    frontier_nodes: list[tuple[NodeId, str]] = field(default_factory=list)
    adjacent: list[Triple] = field(default_factory=list)
    names: Mapping[NodeId, str] = field(default_factory=dict)

    def name(self, node_id: NodeId) -> str:
        return self.names.get(node_id, node_id)

    def triple_text(self, t: Triple) -> str:
        return f"{self.name(t.head)} → {t.relation} → {self.name(t.tail)}"


@dataclass(frozen=True)
class NavigatorDecision:
    sufficient: bool
    selected: tuple[Triple, ...] = ()
    candidates: tuple[NodeId, ...] = ()

    def to_dict(self) -> dict:
        return {
            "sufficient": self.sufficient,
            "selected": [t.to_dict() for t in self.selected],
            "candidates": list(self.candidates),
        }


def make_decision(ctx: NavigatorContext, sufficient: bool, selected: Iterable[Triple]) -> NavigatorDecision:
    """Build a decision, deriving candidates from the selected triples.

    Candidates are the endpoints of the selection that are neither in the
    current frontier nor visited in an earlier step.
    """
    allowed = set(ctx.adjacent)
    chosen: list[Triple] = []
    for t in selected:
        if t not in allowed:
            raise ValueError(f"selected triple {t} is not among the adjacent triples")
        if t not in chosen:
            chosen.append(t)
    seen = {n for n, _ in ctx.visited_nodes} | {n for n, _ in ctx.frontier_nodes}
    cands = dict.fromkeys(n for t in chosen for n in t.endpoints() if n not in seen)
    return NavigatorDecision(bool(sufficient), tuple(chosen), tuple(cands))


class Navigator(Protocol):
    def decide(self, ctx: NavigatorContext) -> NavigatorDecision: ...


# -- entity extraction ------------------------------------------------------------


@dataclass(frozen=True)
class ExtractionResult:
    entities: tuple[str, ...]

    @property
    def k(self) -> int:
        return len(self.entities)


def parse_entity_list(raw: str) -> ExtractionResult:
    out: list[str] = []
    for part in raw.split(","):
        m = part.strip().strip("[]").strip().strip("'\"").strip()
        if m and m not in out:
            out.append(m)
    return ExtractionResult(tuple(out))


def extract_entities(query: str, backend: TextBackend) -> ExtractionResult:
    if not query.strip():
        raise ValueError("query is empty")
    raw = backend.complete(prompts.render("extract_entities", query=query))
    return parse_entity_list(raw)


class LLMExtractor:
    def __init__(self, backend: TextBackend):
        self.backend = backend

    def __call__(self, query: str) -> ExtractionResult:
        return extract_entities(query, self.backend)


class LexicalExtractor:
    """Maximal runs of consecutive content tokens, in query order."""

    def __call__(self, query: str) -> ExtractionResult:
        runs: list[str] = []
        cur: list[str] = []
        for tok in _TOKEN.findall(query.lower()):
            if tok in STOPWORDS:
                if cur:
                    runs.append(" ".join(cur))
                cur = []
            else:
                cur.append(tok)
        if cur:
            runs.append(" ".join(cur))
        return ExtractionResult(tuple(dict.fromkeys(runs)))


class FixedExtractor:
    def __init__(self, entities: Sequence[str]):
        self.result = ExtractionResult(tuple(dict.fromkeys(entities)))

    def __call__(self, query: str) -> ExtractionResult:
        return self.result


# -- prompt rendering and parsing ---------------------------------------------------


def _lines_or_none(lines: list[str]) -> str:
    return "\n".join(lines) if lines else "none"


def _with_source(text: str, t: Triple) -> str:
    return f"{text} | source text: {t.source_text}" if t.source_text else text


def render_navigation_prompt(ctx: NavigatorContext) -> str:
    visited = [name for _, name in ctx.visited_nodes]
    selected = [_with_source(ctx.triple_text(t), t) for t in ctx.selected_so_far]
    current = [name for _, name in ctx.frontier_nodes]
    adjacent = [_with_source(f"{i}. {ctx.triple_text(t)}", t)
                for i, t in enumerate(ctx.adjacent, start=1)]
    return prompts.render(
        "navigation",
        query=ctx.query,
        visited_nodes=_lines_or_none(visited),
        selected_triplets=_lines_or_none(selected),
        current_nodes=_lines_or_none(current),
        adjacent_triplets=_lines_or_none(adjacent),
    )


def _selection_indices(sel) -> list[int]:
    if sel is None:
        return []
    if isinstance(sel, bool):
        raise TypeError("boolean selection")
    if isinstance(sel, int):
        return [sel]
    if isinstance(sel, str):
        return [int(tok) for tok in re.split(r"[,\s;]+", sel) if _DIGITS.fullmatch(tok)]
    if isinstance(sel, list):
        out = []
        for item in sel:
            if isinstance(item, int) and not isinstance(item, bool):
                out.append(item)
            elif isinstance(item, str) and _DIGITS.fullmatch(item.strip()):
                out.append(int(item.strip()))
        return out
    raise TypeError(f"selection of type {type(sel).__name__}")


def parse_navigation_response(raw: str, ctx: NavigatorContext, strict: bool = False) -> NavigatorDecision:
    """Read ``determination`` and ``selection`` from a navigation reply.

    Indices are 1-based into ``ctx.adjacent``; out-of-range, non-numeric
    and repeated indices are dropped. A reply without a recognizable
    determination raises ``NavigationParseError``.
    """
    obj = find_json_object(raw, strict=strict)
    if obj is None:
        raise NavigationParseError("no JSON object in navigation reply", raw)
    det = obj.get("determination")
    if not isinstance(det, str) or det.strip().lower() not in ("sufficient", "insufficient"):
        raise NavigationParseError(f"bad determination {det!r}", raw)
    try:
        idx = _selection_indices(obj.get("selection"))
    except TypeError as exc:
        raise NavigationParseError(str(exc), raw) from None
    n = len(ctx.adjacent)
    picked = [ctx.adjacent[i - 1] for i in dict.fromkeys(idx) if 1 <= i <= n]
    return make_decision(ctx, det.strip().lower() == "sufficient", picked)


# -- implementations ------------------------------------------------------------------


class LLMNavigator:
    def __init__(self, backend: TextBackend, strict: bool = False):
        self.backend = backend
        self.strict = strict

    def decide(self, ctx: NavigatorContext) -> NavigatorDecision:
        prompt = render_navigation_prompt(ctx)
        return complete_with_retry(
            self.backend, prompt, lambda raw: parse_navigation_response(raw, ctx, self.strict)
        )


def lexical_navigator(ctx: NavigatorContext, select_top: int = 3) -> NavigatorDecision:
    query_tokens = set(content_tokens(ctx.query))

    def tokens(t: Triple) -> set[str]:
        return set(content_tokens(f"{ctx.triple_text(t)} {t.source_text or ''}"))

    scored = [(len(query_tokens & tokens(t)), i) for i, t in enumerate(ctx.adjacent)]
    ranked = sorted((p for p in scored if p[0] > 0), key=lambda p: (-p[0], p[1]))
    picked = [ctx.adjacent[i] for _, i in ranked[:select_top]]
    covered: set[str] = set()
    for t in list(ctx.selected_so_far) + picked:
        covered |= tokens(t)
    sufficient = bool(query_tokens) and query_tokens <= covered
    return make_decision(ctx, sufficient, picked)


class LexicalNavigator:
    """Token-overlap navigator: a pure function of the context."""

    def __init__(self, select_top: int = 3):
        if select_top < 1:
            raise ValueError("select_top must be >= 1")
        self.select_top = select_top

    def decide(self, ctx: NavigatorContext) -> NavigatorDecision:
        return lexical_navigator(ctx, self.select_top)


@dataclass(frozen=True)
class ScriptStep:
    """One scripted decision. ``selection`` holds (head, relation, tail)
    triples by node name or id; names are canonicalized before matching."""

    sufficient: bool
    selection: tuple[tuple[str, str, str], ...] = ()


class ScriptedNavigator:
    """Returns the i-th scripted decision on the i-th call."""

    def __init__(self, script: Sequence[ScriptStep | NavigatorDecision]):
        self.script = list(script)
        self.calls = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedNavigator":
        steps, _ = load_script(path)
        return cls(steps)

    def decide(self, ctx: NavigatorContext) -> NavigatorDecision:
        if self.calls >= len(self.script):
            raise ScriptExhaustedError(
                f"script has {len(self.script)} steps; call {self.calls + 1} requested"
            )
        step = self.script[self.calls]
        self.calls += 1
        if isinstance(step, NavigatorDecision):
            return make_decision(ctx, step.sufficient, step.selected)
        by_key = {(t.head, t.relation.lower(), t.tail): t for t in ctx.adjacent}
        picked = []
        for h, r, tl in step.selection:
            t = by_key.get((canonical_key(h), r.strip().lower(), canonical_key(tl)))
            if t is None:
                raise DataError(f"scripted triple {h} → {r} → {tl} is not adjacent at step {self.calls}")
            picked.append(t)
        return make_decision(ctx, step.sufficient, picked)


def load_script(path: str | Path) -> tuple[list[ScriptStep], list[str] | None]:
    """Read a script file: ``{"entities": [...]?, "steps": [{"determination", "selection"}]}``."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        steps = [
            ScriptStep(
                s["determination"] == "sufficient",
                tuple(tuple(x) for x in s.get("selection", [])),
            )
            for s in doc["steps"]
        ]
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed navigator script ({exc})") from None
    return steps, doc.get("entities")

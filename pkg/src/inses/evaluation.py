"""Exact Match, LLM-judge scoring, per-article accuracy, and the eval driver."""

from __future__ import annotations

import json
import logging
import string
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import prompts
from .errors import InsesError, JudgeParseError, RecordError
from .llm import TextBackend, complete_with_retry, find_json_object
from .router import RouteDecision, routing_stats

logger = logging.getLogger(__name__)

METRICS = ("em", "judge", "mine")
DIGIT_ONLY_SUFFIX = '\n\nRespond with only "1" or "0".'

_ARTICLES = frozenset({"a", "an", "the"})
_PUNCT = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, drop ASCII punctuation, drop the words a/an/the, collapse whitespace.

    Articles are removed as whole whitespace-separated words, so non-ASCII
    neighbors ("the·x") are left alone.
    """
    return " ".join(w for w in text.lower().translate(_PUNCT).split() if w not in _ARTICLES)


def exact_match(prediction: str, ground_truth: str, strict: bool = False) -> int:
    if strict:
        return int(prediction == ground_truth)
    return int(normalize_answer(prediction) == normalize_answer(ground_truth))


# -- judges ---------------------------------------------------------------------------


def parse_equivalence(raw: str) -> dict:
    obj = find_json_object(raw)
    if obj is None:
        raise JudgeParseError("no JSON object in judge reply", raw)
    verdict = obj.get("is_equivalent")
    if isinstance(verdict, str) and verdict.strip().lower() in ("true", "false"):
        verdict = verdict.strip().lower() == "true"
    if not isinstance(verdict, bool):
        raise JudgeParseError(f"is_equivalent must be a boolean, got {verdict!r}", raw)
    explanation = obj.get("explanation", "")
    return {"is_equivalent": verdict,
            "explanation": explanation if isinstance(explanation, str) else json.dumps(explanation)}


def parse_sufficiency(raw: str) -> int:
    s = raw.strip()
    if s not in ("0", "1"):
        raise JudgeParseError(f"expected a bare 0 or 1, got {raw[:40]!r}", raw)
    return int(s)


def judge_equivalence(question: str, ground_truth: str, prediction: str, backend: TextBackend) -> dict:
    prompt = prompts.render("judge_equivalence", question=question,
                            ground_truth=ground_truth, prediction=prediction)
    return complete_with_retry(backend, prompt, parse_equivalence)


def judge_sufficiency(context_triples: str, correct_answer: str, backend: TextBackend) -> int:
    prompt = prompts.render("judge_sufficiency", context=context_triples, correct_answer=correct_answer)
    return complete_with_retry(backend, prompt, parse_sufficiency, suffix=DIGIT_ONLY_SUFFIX)


# -- per-article scores ---------------------------------------------------------------


@dataclass(frozen=True)
class ArticleScore:
    article_id: str
    correct: int
    total: int
    accuracy: float

    def __post_init__(self):
        if not 0 <= self.correct <= self.total or self.total < 1:
            raise ValueError(f"need 0 <= correct <= total and total >= 1, got {self.correct}/{self.total}")

    def to_dict(self) -> dict:
        return {"article_id": self.article_id, "correct": self.correct,
                "total": self.total, "accuracy": self.accuracy}


def score_article(results: Sequence[int], article_id: str, total: int | None = None) -> ArticleScore:
    if not results:
        raise ValueError(f"article {article_id!r} has no results")
    if any(r not in (0, 1) for r in results):
        raise ValueError("results must be 0 or 1")
    total = len(results) if total is None else total
    correct = sum(results)
    return ArticleScore(article_id, correct, total, correct / total)


# -- dataset and report types -----------------------------------------------------------


@dataclass(frozen=True)
class DatasetItem:
    id: str
    question: str
    answer: str
    article_id: str | None = None


def load_dataset(source: str | Path | Iterable[str]) -> list[DatasetItem]:
    lines: Iterable[str]
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            lines = fh.readlines()
    else:
        lines = source
    items = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordError(lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise RecordError(lineno, "record must be a JSON object")
        for key in ("id", "question", "answer"):
            if not isinstance(rec.get(key), str) or not rec[key].strip():
                raise RecordError(lineno, f"field {key!r} must be a non-empty string")
        art = rec.get("article_id")
        if art is not None and not isinstance(art, str):
            raise RecordError(lineno, "field 'article_id' must be a string")
        items.append(DatasetItem(rec["id"], rec["question"], rec["answer"], art))
    return items


@dataclass
class EvalRecord:
    """One dataset item after running the pipeline and the metrics.

    ``metrics`` maps metric name to 0/1, or None when the metric could not
    be computed; the reason then sits in ``metric_errors``.
    """

    query: str
    ground_truth: str
    prediction: str | None = None
    route: RouteDecision | None = None
    trace_path: str | None = None
    id: str = ""
    article_id: str | None = None
    error: str | None = None
    metrics: dict[str, int | None] = field(default_factory=dict)
    metric_errors: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.query or not self.ground_truth:
            raise ValueError("query and ground_truth must be non-empty")

    def to_dict(self) -> dict:
        return {
            "id": self.id, "article_id": self.article_id, "query": self.query,
            "ground_truth": self.ground_truth, "prediction": self.prediction,
            "route": None if self.route is None else self.route.to_dict(),
            "trace_path": self.trace_path, "error": self.error,
            "metrics": dict(self.metrics), "metric_errors": dict(self.metric_errors),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalRecord":
        route = d.get("route")
        return cls(
            query=d["query"], ground_truth=d["ground_truth"], prediction=d.get("prediction"),
            route=None if route is None else RouteDecision.from_dict(route),
            trace_path=d.get("trace_path"), id=d.get("id", ""), article_id=d.get("article_id"),
            error=d.get("error"), metrics=dict(d.get("metrics", {})),
            metric_errors=dict(d.get("metric_errors", {})),
        )


@dataclass
class EvalReport:
    records: list[EvalRecord]
    summary: dict

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps({"record": rec.to_dict()}, ensure_ascii=False, sort_keys=True) + "\n")
            fh.write(json.dumps({"summary": self.summary}, ensure_ascii=False, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "EvalReport":
        records, summary = [], None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                if "record" in obj:
                    records.append(EvalRecord.from_dict(obj["record"]))
                elif "summary" in obj:
                    summary = obj["summary"]
        if summary is None:
            raise RecordError(0, f"{path}: report has no summary line")
        return cls(records, summary)


# -- pipeline output ------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineOutput:
    prediction: str
    context: str = ""
    route: RouteDecision | None = None
    trace: list | None = None


EvalPipeline = Callable[[str], PipelineOutput]


def rag_runner(rag) -> EvalPipeline:
    def run(query: str) -> PipelineOutput:
        return PipelineOutput(rag.answer(query).answer)
    return run


def inses_runner(inses) -> EvalPipeline:
    def run(query: str) -> PipelineOutput:
        payload = inses.answer(query)
        return PipelineOutput(payload.get("answer") or "", payload.get("context", ""),
                              trace=payload.get("trace"))
    return run


def router_runner(rag, inses, config) -> EvalPipeline:
    from .router import route_query

    def run(query: str) -> PipelineOutput:
        payload, decision = route_query(query, rag, inses, config)
        return PipelineOutput(payload.get("answer") or "", payload.get("context", ""),
                              route=decision, trace=payload.get("trace"))
    return run


# -- driver ---------------------------------------------------------------------------


def _mean(values: Iterable[int | None]) -> tuple[float, int]:
    vals = [v for v in values if v is not None]
    return (sum(vals) / len(vals) if vals else 0.0), len(vals)


def run_eval(
    dataset: Iterable[DatasetItem],
    pipeline: EvalPipeline,
    metrics: Sequence[str] = ("em",),
    judge_backend: TextBackend | None = None,
    em_strict: bool = False,
    judge_delay_s: float = 0.0,
    config: dict | None = None,
    trace_dir: str | Path | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> EvalReport:
    """Run every item through ``pipeline`` and score it, one at a time.

    Pipeline failures are recorded on the item and do not stop the run.
    Judge replies that stay unparseable after the retry leave the metric
    unevaluated (None); they never count as a score. Means are taken over
    evaluated items only, and the counts are reported alongside.
    """
    unknown = set(metrics) - set(METRICS)
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")
    if {"judge", "mine"} & set(metrics) and judge_backend is None:
        raise ValueError("judge metrics need a judge backend")

    records: list[EvalRecord] = []
    judged = 0

    def pause():
        nonlocal judged
        if judged and judge_delay_s > 0:
            sleep(judge_delay_s)
        judged += 1

    for item in dataset:
        rec = EvalRecord(item.question, item.answer, id=item.id, article_id=item.article_id)
        records.append(rec)
        try:
            out = pipeline(item.question)
        except InsesError as exc:
            logger.warning("item %s: pipeline failed: %s", item.id, exc)
            rec.error = f"{type(exc).__name__}: {exc}"
            rec.metrics = {m: None for m in metrics}
            continue
        rec.prediction = out.prediction
        rec.route = out.route
        if trace_dir is not None and out.trace is not None:
            path = Path(trace_dir) / f"{item.id}.trace.jsonl"
            with open(path, "w", encoding="utf-8") as fh:
                for t in out.trace:
                    fh.write(json.dumps(t, ensure_ascii=False) + "\n")
            rec.trace_path = str(path)
        for m in metrics:
            if m == "em":
                rec.metrics[m] = exact_match(out.prediction, item.answer, em_strict)
                continue
            pause()
            try:
                if m == "judge":
                    rec.metrics[m] = int(judge_equivalence(
                        item.question, item.answer, out.prediction, judge_backend)["is_equivalent"])
                else:
                    rec.metrics[m] = judge_sufficiency(out.context, item.answer, judge_backend)
            except InsesError as exc:
                logger.warning("item %s: %s judge unevaluated: %s", item.id, m, exc)
                rec.metrics[m] = None
                rec.metric_errors[m] = f"{type(exc).__name__}: {exc}"

    return EvalReport(records, summarize(records, metrics, config))


def summarize(records: Sequence[EvalRecord], metrics: Sequence[str], config: dict | None = None) -> dict:
    agg = {}
    for m in metrics:
        mean, n = _mean(r.metrics.get(m) for r in records)
        agg[m] = {"mean": mean, "evaluated": n}
    summary = {
        "records": len(records),
        "errors": sum(1 for r in records if r.error is not None),
        "metrics": agg,
        "routing": None,
        "articles": None,
        "config": config or {},
    }
    routes = [r.route for r in records if r.route is not None]
    if routes:
        summary["routing"] = routing_stats(routes).to_dict()
    if "mine" in metrics:
        by_article: dict[str, list[int]] = defaultdict(list)
        for r in records:
            v = r.metrics.get("mine")
            if r.article_id is not None and v is not None:
                by_article[r.article_id].append(v)
        summary["articles"] = [score_article(v, a).to_dict() for a, v in sorted(by_article.items())]
    return summary


def mean_article_accuracy(scores: Iterable[ArticleScore]) -> float:
    scores = list(scores)
    return sum(s.accuracy for s in scores) / len(scores) if scores else 0.0


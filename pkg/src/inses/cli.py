"""Command-line entry point: ingest, query, route, eval, stats.

Exit status: 0 success, 1 usage error, 2 data error, 3 backend or
model-output error. A human summary goes to stdout; the machine-readable
JSON goes to stderr, or to ``--json-out`` when given.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import kg_store
from .embedding import CachedEmbedder, FixtureEmbedder, HashEmbedder, HttpEmbedder, build_index, embed_graph_nodes
from .errors import BackendError, InsesError, RouteError, SearchError
from .evaluation import METRICS, inses_runner, load_dataset, rag_runner, router_runner, run_eval
from .llm import HttpBackend
from .navigator import FixedExtractor, LexicalExtractor, LexicalNavigator, LLMExtractor, LLMNavigator, ScriptedNavigator, load_script
from .rag import DEFAULT_TOP_K, RagPipeline, ingest_chunks, read_chunks
from .router import HeuristicClassifier, LLMClassifier, RouterConfig, route_query
from .search import InsesPipeline, SearchConfig, TraceRecord, write_trace

logger = logging.getLogger("inses")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- argument groups --------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of flag defaults; explicit flags win")
    p.add_argument("--json-out", help="write machine-readable JSON here instead of stderr")
    p.add_argument("-v", "--verbose", action="store_true")


def _search_flags(p: argparse.ArgumentParser) -> None:
    d = SearchConfig()
    p.add_argument("--graph", required=True, help="saved graph or raw triples JSONL")
    p.add_argument("--max-iter", type=int, default=d.max_iter)
    p.add_argument("--tau-sim", type=float, default=d.tau_sim,
                   help="similarity expansion threshold (tuning knob, default %(default)s)")
    p.add_argument("--expansion-per-node", type=int, default=d.expansion_per_node)
    p.add_argument("--max-select-per-step", type=int, default=d.max_select_per_step)
    p.add_argument("--entity-anchor-floor", type=float, default=d.entity_anchor_floor)
    p.add_argument("--navigator", default="llm", help="llm | lexical | scripted:<file>")
    p.add_argument("--extractor", default="auto", help="auto | llm | lexical | fixed:<a,b,...>")
    p.add_argument("--embedder", default="hash", help="hash | external | fixture:<file>")
    p.add_argument("--embed-cache", help="JSONL cache for the external embedder")
    p.add_argument("--ann", choices=("auto", "exact", "approximate"), default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--llm-timeout-s", type=float, default=60.0)
    p.add_argument("--strict-parse", action="store_true", help="reject replies that are not a bare JSON object")
    p.add_argument("--answer", choices=("auto", "llm", "none"), default="auto",
                   help="generate a final answer from the evidence (auto: only with the llm navigator)")


def _route_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--chunks", required=True, help="chunk JSONL for retrieval")
    p.add_argument("--confidence-threshold", type=float, default=RouterConfig().confidence_threshold)
    p.add_argument("--classifier", choices=("llm", "heuristic"), default="llm")
    p.add_argument("--rag-top-k", type=int, default=DEFAULT_TOP_K)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="inses", description="Knowledge-graph search with similarity expansion.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate and store triples or chunks")
    _common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--triples")
    src.add_argument("--chunks")
    p.add_argument("--out", required=True)
    p.add_argument("--embedding-dim", type=int, default=kg_store.DEFAULT_EMBEDDING_DIM)

    p = sub.add_parser("query", help="search the graph for one question")
    _common(p)
    _search_flags(p)
    p.add_argument("--question", required=True)
    p.add_argument("--trace-out")

    p = sub.add_parser("route", help="answer one question through the router")
    _common(p)
    _search_flags(p)
    _route_flags(p)
    p.add_argument("--question", required=True)

    p = sub.add_parser("eval", help="score a pipeline on a dataset")
    _common(p)
    _search_flags(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--pipeline", choices=("rag", "inses", "router"), required=True)
    p.add_argument("--metrics", default="em", help="comma list from: " + ",".join(METRICS))
    p.add_argument("--report", required=True)
    p.add_argument("--em-strict", action="store_true", help="compare answers without normalization")
    p.add_argument("--judge-delay-s", type=float, default=0.0)
    p.add_argument("--trace-dir")
    p.add_argument("--chunks", help="chunk JSONL (rag and router pipelines)")
    p.add_argument("--confidence-threshold", type=float, default=RouterConfig().confidence_threshold)
    p.add_argument("--classifier", choices=("llm", "heuristic"), default="llm")
    p.add_argument("--rag-top-k", type=int, default=DEFAULT_TOP_K)

    p = sub.add_parser("stats", help="node/edge counts and average degree")
    _common(p)
    p.add_argument("--graph", required=True)
    return parser


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    """Parse ``argv`` with values from ``--config`` installed as defaults,
    so explicit flags always win over the file."""
    argv = list(argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    if not known.config or command not in COMMANDS:
        return parser.parse_args(argv)
    try:
        with open(known.config, encoding="utf-8") as fh:
            conf = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {known.config}: {exc}")
    if not isinstance(conf, dict):
        parser.error("config file must hold a JSON object")
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub.choices[command]
    conf = {k.replace("-", "_"): v for k, v in conf.items()}
    unknown = sorted(set(conf) - {a.dest for a in subparser._actions})
    if unknown:
        parser.error(f"unknown config keys for {command}: {', '.join(unknown)}")
    for a in subparser._actions:
        if a.dest in conf:
            a.required = False
    subparser.set_defaults(**conf)
    return parser.parse_args(argv)


# -- wiring ---------------------------------------------------------------------------


def open_graph(path: str) -> kg_store.PropertyGraph:
    """A saved graph (with header) or a raw triples file."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    try:
        header = json.loads(first)
    except json.JSONDecodeError:
        header = None
    if isinstance(header, dict) and header.get("format") == kg_store.FORMAT_NAME:
        return kg_store.load(path)
    return kg_store.ingest_triples(path)


class Wiring:
    """Builds providers from parsed flags, creating the LLM client once."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self._llm = None
        self.script_entities: list[str] | None = None

    def llm(self) -> HttpBackend:
        if self._llm is None:
            self._llm = HttpBackend.from_env(timeout_s=self.args.llm_timeout_s)
        return self._llm

    def embedder(self, dim: int):
        spec = self.args.embedder
        if spec == "hash":
            return HashEmbedder(dim=dim)
        if spec == "external":
            emb = HttpEmbedder.from_env(timeout_s=self.args.llm_timeout_s)
            return CachedEmbedder(emb, self.args.embed_cache) if self.args.embed_cache else emb
        if spec.startswith("fixture:"):
            return FixtureEmbedder.from_file(spec.split(":", 1)[1])
        raise UsageError(f"unknown embedder {spec!r}")

    def navigator_factory(self):
        spec = self.args.navigator
        if spec == "llm":
            backend = self.llm()
            return lambda: LLMNavigator(backend, strict=self.args.strict_parse)
        if spec == "lexical":
            return LexicalNavigator
        if spec.startswith("scripted:"):
            steps, entities = load_script(spec.split(":", 1)[1])
            self.script_entities = entities
            return lambda: ScriptedNavigator(steps)
        raise UsageError(f"unknown navigator {spec!r}")

    def extractor(self):
        spec = self.args.extractor
        if spec == "auto":
            if self.script_entities:
                return FixedExtractor(self.script_entities)
            spec = "llm" if self.args.navigator == "llm" else "lexical"
        if spec == "llm":
            return LLMExtractor(self.llm())
        if spec == "lexical":
            return LexicalExtractor()
        if spec.startswith("fixed:"):
            return FixedExtractor([e.strip() for e in spec.split(":", 1)[1].split(",") if e.strip()])
        raise UsageError(f"unknown extractor {spec!r}")

    def search_config(self) -> SearchConfig:
        a = self.args
        try:
            return SearchConfig(a.max_iter, a.tau_sim, a.expansion_per_node,
                                a.max_select_per_step, a.entity_anchor_floor)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def inses(self) -> tuple[InsesPipeline, dict]:
        graph = open_graph(self.args.graph)
        embedder = self.embedder(graph.embedding_dim)
        index = build_index(embed_graph_nodes(graph, embedder), mode=self.args.ann, seed=self.args.seed)
        factory = self.navigator_factory()
        extractor = self.extractor()
        answer = self.args.answer
        if answer == "auto":
            answer = "llm" if self.args.navigator == "llm" else "none"
        config = self.search_config()
        pipeline = InsesPipeline(graph, index, factory, extractor, embedder, config,
                                 self.llm() if answer == "llm" else None)
        info = {
            "search": config.to_dict(),
            "navigator": self.args.navigator,
            "embedder": embedder.identity,
            "index": index.mode,
            "seed": self.args.seed,
            "answer_backend": None if answer == "none" else self.llm().identity,
        }
        return pipeline, info

    def rag(self, chunks_path: str, dim: int) -> tuple[RagPipeline, dict]:
        embedder = self.embedder(dim)
        index = ingest_chunks(chunks_path, embedder)
        pipeline = RagPipeline(index, embedder, self.llm(), k=self.args.rag_top_k)
        return pipeline, {"rag_top_k": self.args.rag_top_k, "chunks": len(index),
                          "rag_backend": self.llm().identity}

    def router_config(self) -> RouterConfig:
        clf = LLMClassifier(self.llm()) if self.args.classifier == "llm" else HeuristicClassifier()
        try:
            return RouterConfig(self.args.confidence_threshold, clf)
        except ValueError as exc:
            raise UsageError(str(exc)) from None


def _emit(args, obj: dict) -> None:
    text = json.dumps(obj, ensure_ascii=False, sort_keys=True)
    if getattr(args, "json_out", None):
        Path(args.json_out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text, file=sys.stderr)


# -- commands -------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    if args.triples:
        if args.embedding_dim < 1:
            raise UsageError("--embedding-dim must be positive")
        graph = kg_store.ingest_triples(args.triples, embedding_dim=args.embedding_dim)
        kg_store.save(graph, args.out)
        stats = kg_store.graph_stats(graph)
        print(f"graph: {stats.node_count} nodes, {stats.edge_count} edges -> {args.out}")
        _emit(args, {"kind": "graph", "out": args.out, **stats.to_dict()})
        return EXIT_OK
    chunks = read_chunks(args.chunks)
    with open(args.out, "w", encoding="utf-8") as fh:
        for c in chunks:
            fh.write(json.dumps({"id": c.id, "text": c.text}, ensure_ascii=False) + "\n")
    print(f"chunks: {len(chunks)} -> {args.out}")
    _emit(args, {"kind": "chunks", "out": args.out, "chunk_count": len(chunks)})
    return EXIT_OK


def _print_search(payload: dict) -> None:
    print(f"stop: {payload['stop_reason']} after {payload['iterations']} iteration(s)")
    print(f"evidence ({len(payload['evidence'])} triples):")
    for line in payload["evidence"]:
        print(f"  {line}")
    if payload.get("answer") is not None:
        print(f"answer: {payload['answer']}")


def cmd_query(args) -> int:
    pipeline, info = Wiring(args).inses()
    payload = pipeline.answer(args.question)
    if args.trace_out:
        write_trace([TraceRecord.from_dict(r) for r in payload["trace"]], args.trace_out)
    _print_search(payload)
    _emit(args, {"query": args.question, "result": payload, "config": info})
    return EXIT_OK


def cmd_route(args) -> int:
    w = Wiring(args)
    inses, info = w.inses()
    rag, rag_info = w.rag(args.chunks, inses.graph.embedding_dim)
    config = w.router_config()
    payload, decision = route_query(args.question, rag, inses, config)
    print(f"route: {decision.route.value} ({decision.cause.value})")
    if decision.route.value == "inses":
        _print_search(payload)
    else:
        print(f"answer: {payload['answer']} (confidence {payload['confidence']:.2f})")
    _emit(args, {"query": args.question, "decision": decision.to_dict(), "result": payload,
                 "config": {**info, **rag_info, "confidence_threshold": config.confidence_threshold,
                            "classifier": args.classifier}})
    return EXIT_OK


def cmd_eval(args) -> int:
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    bad = sorted(set(metrics) - set(METRICS))
    if bad or not metrics:
        raise UsageError(f"unknown metrics {bad}; choose from {', '.join(METRICS)}")
    if args.pipeline in ("rag", "router") and not args.chunks:
        raise UsageError(f"--chunks is required for the {args.pipeline} pipeline")
    dataset = load_dataset(args.dataset)
    w = Wiring(args)
    inses, info = w.inses()
    config = {**info, "pipeline": args.pipeline, "metrics": metrics, "em_strict": args.em_strict}
    if args.pipeline == "inses":
        runner = inses_runner(inses)
    else:
        rag, rag_info = w.rag(args.chunks, inses.graph.embedding_dim)
        config.update(rag_info)
        if args.pipeline == "rag":
            runner = rag_runner(rag)
        else:
            rc = w.router_config()
            config.update(confidence_threshold=rc.confidence_threshold, classifier=args.classifier)
            runner = router_runner(rag, inses, rc)
    judge = w.llm() if {"judge", "mine"} & set(metrics) else None
    if judge is not None:
        config["judge_backend"] = judge.identity
    if args.trace_dir:
        Path(args.trace_dir).mkdir(parents=True, exist_ok=True)
    report = run_eval(dataset, runner, metrics, judge, args.em_strict, args.judge_delay_s,
                      config, args.trace_dir)
    report.write(args.report)
    s = report.summary
    print(f"records: {s['records']}  errors: {s['errors']}")
    for m, agg in s["metrics"].items():
        print(f"{m}: {agg['mean']:.4f} over {agg['evaluated']} evaluated")
    if s["routing"]:
        r = s["routing"]
        print(f"routing: rag {r['rag_share']:.2f}, inses {r['inses_share']:.2f}, "
              f"escalation {r['escalation_rate']:.2f}")
    _emit(args, {"report": args.report, "summary": s})
    return EXIT_OK


def cmd_stats(args) -> int:
    stats = kg_store.graph_stats(open_graph(args.graph))
    print(f"nodes: {stats.node_count}  edges: {stats.edge_count}  "
          f"average degree: {stats.average_degree:.2f}")
    _emit(args, stats.to_dict())
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "query": cmd_query, "route": cmd_route,
            "eval": cmd_eval, "stats": cmd_stats}


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (SearchError, RouteError)) and exc.cause is not None:
        return exit_code(exc.cause)
    if isinstance(exc, (UsageError, FileNotFoundError)):
        return EXIT_USAGE
    if isinstance(exc, BackendError):
        return EXIT_BACKEND
    return EXIT_DATA


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (InsesError, UsageError, OSError) as exc:
        code = exit_code(exc)
        print(f"inses: error: {exc}", file=sys.stderr)
        _emit(args, {"error": type(exc).__name__, "message": str(exc), "exit_status": code})
        return code


if __name__ == "__main__":
    sys.exit(main())

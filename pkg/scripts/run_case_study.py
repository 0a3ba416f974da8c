"""Replay the bundled Douglass case study with and without similarity expansion.

    python scripts/run_case_study.py [--tau-sim 0.8]
"""

from __future__ import annotations

import argparse

from inses import case_study as cs
from inses.navigator import FixedExtractor
from inses.search import SearchConfig, run_search


def show(title: str, result, graph) -> None:
    print(f"== {title}: {result.stop_reason.value} after {len(result.trace)} iteration(s)")
    for rec in result.trace:
        names = lambda ids: [graph.name(n) for n in ids]  # noqa: E731
        print(f"iter={rec.iteration}")
        print(f"  current:   {names(rec.frontier)}")
        print(f"  selected:  {[graph.render_triple(t) for t in rec.selected]}")
        print(f"  candidate: {names(rec.candidates)}")
        if rec.sim is not None:
            print(f"  sim:       {names(rec.sim)}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tau-sim", type=float, default=SearchConfig().tau_sim)
    args = ap.parse_args()

    graph, embedder = cs.load_graph(), cs.load_embedder()
    index = cs.load_index(graph, embedder)
    extractor = FixedExtractor(cs.ENTITIES)
    print(f"query: {cs.QUERY}\n")
    off = run_search(graph, index, cs.load_navigator(False), extractor, embedder,
                     SearchConfig(tau_sim=1.0), query=cs.QUERY)
    show("without expansion", off, graph)
    print()
    on = run_search(graph, index, cs.load_navigator(True), extractor, embedder,
                    SearchConfig(tau_sim=args.tau_sim), query=cs.QUERY)
    show(f"with expansion (tau_sim={args.tau_sim})", on, graph)


if __name__ == "__main__":
    main()

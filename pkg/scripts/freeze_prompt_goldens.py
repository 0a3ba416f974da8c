"""Render every prompt with fixed sample slots into tests/golden/.

Run once after checking the templates by eye; the test suite then compares
fresh renderings against these files byte for byte.

    python scripts/freeze_prompt_goldens.py
"""

from __future__ import annotations

from pathlib import Path

from inses import prompts
from inses.kg_store import Triple
from inses.navigator import NavigatorContext, render_navigation_prompt
from inses.rag import Chunk, render_rag_prompt

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden"

QUERY = "Which river flows through the capital of France?"

SAMPLES = {
    "extract_entities": {"query": QUERY},
    "navigation": {
        "query": QUERY,
        "visited_nodes": "none",
        "selected_triplets": "none",
        "current_nodes": "France",
        "adjacent_triplets": "1. France → Capital → Paris",
    },
    "answer_with_triples": {
        "query": QUERY,
        "context": "France → Capital → Paris\nSeine → Flows through → Paris",
    },
    "naive_rag": {"query": QUERY, "context": "Paris is the capital of France.\n\nThe Seine flows through Paris."},
    "judge_equivalence": {"question": QUERY, "ground_truth": "the Seine", "prediction": "Seine River"},
    "judge_sufficiency": {"context": "Seine → Flows through → Paris", "correct_answer": "The Seine flows through Paris."},
    "classify_multihop": {"query": QUERY},
}


def navigation_context() -> NavigatorContext:
    names = {"france": "France", "paris": "Paris", "seine": "Seine"}
    t1 = Triple("france", "Capital", "paris", "Paris is the capital of France.")
    t2 = Triple("seine", "Flows through", "paris")
    return NavigatorContext(
        query=QUERY,
        visited_nodes=[("france", "France")],
        selected_so_far=[t1],
        frontier_nodes=[("paris", "Paris")],
        adjacent=[t1, t2],
        names=names,
    )


def renderings() -> dict[str, str]:
    out = {name: prompts.render(name, **slots) for name, slots in SAMPLES.items()}
    out["navigation_rendered"] = render_navigation_prompt(navigation_context())
    out["naive_rag_rendered"] = render_rag_prompt(
        QUERY, [Chunk("c1", "Paris is the capital of France."), Chunk("c2", "The Seine flows through Paris.")]
    )
    return out


def main():
    GOLDEN.mkdir(parents=True, exist_ok=True)
    for name, text in renderings().items():
        (GOLDEN / f"{name}.txt").write_text(text, encoding="utf-8")
    print(f"wrote {len(SAMPLES) + 2} golden prompts to {GOLDEN}")


if __name__ == "__main__":
    main()

from __future__ import annotations

import string

import pytest

from conftest import GOLDEN_DIR
from inses import prompts

SLOTS = {
    "extract_entities": {"query"},
    "navigation": {"query", "visited_nodes", "selected_triplets", "current_nodes", "adjacent_triplets"},
    "answer_with_triples": {"query", "context"},
    "naive_rag": {"query", "context"},
    "judge_equivalence": {"question", "ground_truth", "prediction"},
    "judge_sufficiency": {"context", "correct_answer"},
    "classify_multihop": {"query"},
}


def test_every_template_is_listed():
    assert set(prompts.TEMPLATES) == set(SLOTS)


@pytest.mark.parametrize("name", sorted(SLOTS))
def test_template_slots(name):
    fields = {f for _, f, _, _ in string.Formatter().parse(prompts.template(name)) if f}
    assert fields == SLOTS[name]


@pytest.mark.parametrize("name", sorted(SLOTS))
def test_missing_slot_is_an_error(name):
    with pytest.raises(KeyError):
        prompts.render(name)


def test_slot_values_are_not_reformatted():
    out = prompts.render("extract_entities", query="{weird} {{braces}}")
    assert out.endswith("Query: {weird} {{braces}}")


def test_escaped_braces_render_single():
    out = prompts.render("judge_equivalence", question="q", ground_truth="g", prediction="p")
    assert '{\n"is_equivalent": true,' in out and "{{" not in out


def test_unknown_template():
    with pytest.raises(KeyError):
        prompts.template("nope")


def test_golden_files_present():
    names = {p.stem for p in GOLDEN_DIR.glob("*.txt")}
    assert set(SLOTS) <= names
    assert {"navigation_rendered", "naive_rag_rendered"} <= names


def test_sufficiency_prompt_keeps_its_stray_quote():
    first = prompts.template("judge_sufficiency").splitlines()[0]
    assert first.endswith('information in the context."')

"""Prompt templates, stored as text assets and filled with ``str.format``."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

TEMPLATES = (
    "extract_entities",
    "navigation",
    "answer_with_triples",
    "naive_rag",
    "judge_equivalence",
    "judge_sufficiency",
    "classify_multihop",
)


@lru_cache(maxsize=None)
def template(name: str) -> str:
    if name not in TEMPLATES:
        raise KeyError(f"unknown prompt template {name!r}")
    text = resources.files(__package__).joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return text.rstrip("\n")


def render(name: str, **slots: str) -> str:
    return template(name).format(**slots)

from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from inses.errors import BackendError, ParseError
from inses.llm import JSON_ONLY_SUFFIX, HttpBackend, ScriptedBackend, complete_with_retry, find_json_object


def test_find_json_object_in_prose_and_fences():
    raw = 'Sure! ```json\n{"answer": "Paris", "n": {"x": 1}}\n``` hope that helps {"other": 2}'
    assert find_json_object(raw) == {"answer": "Paris", "n": {"x": 1}}


def test_find_json_object_skips_unbalanced_prefixes():
    assert find_json_object('{ nope { "a": 1 }') == {"a": 1}
    assert find_json_object("no braces at all") is None
    assert find_json_object("[{}]") == {}


def test_find_json_object_strict():
    assert find_json_object('{"a": 1}', strict=True) == {"a": 1}
    assert find_json_object('  {"a": 1}\n', strict=True) == {"a": 1}
    assert find_json_object('ok {"a": 1}', strict=True) is None
    assert find_json_object("[1]", strict=True) is None


def test_find_json_object_survives_deep_nesting():
    assert find_json_object("{" * 5000) is None
    assert find_json_object("[" * 5000 + '{"a": 1}') == {"a": 1}


@given(st.text(max_size=60))
def test_find_json_object_agrees_with_scan_oracle(raw):
    objs = oracles.embedded_objects(raw)
    assert find_json_object(raw) == (objs[0] if objs else None)


@given(st.dictionaries(st.text(max_size=5), st.integers() | st.text(max_size=5), max_size=4),
       st.text(alphabet="abc xyz.!\n", max_size=20), st.text(alphabet="abc xyz.!\n", max_size=20))
def test_embedded_object_is_recovered(obj, before, after):
    assert find_json_object(before + json.dumps(obj) + after) == obj


class _Bad(ParseError):
    pass


def _parse(raw):
    if raw != "good":
        raise _Bad("bad", raw)
    return raw


def test_retry_once_with_json_nudge():
    b = ScriptedBackend(["junk", "good"])
    assert complete_with_retry(b, "P", _parse) == "good"
    assert b.prompts == ["P", "P" + JSON_ONLY_SUFFIX]


def test_retry_gives_up_after_second_failure():
    b = ScriptedBackend(["junk", "still junk", "good"])
    with pytest.raises(_Bad):
        complete_with_retry(b, "P", _parse)
    assert len(b.prompts) == 2


def test_retry_custom_suffix():
    b = ScriptedBackend(["junk", "good"])
    complete_with_retry(b, "P", _parse, suffix=" !")
    assert b.prompts[1] == "P !"


def test_scripted_backend_exhausts_and_accepts_callable():
    b = ScriptedBackend([])
    with pytest.raises(BackendError):
        b.complete("x")
    echo = ScriptedBackend(lambda p: p.upper())
    assert echo.complete("hi") == "HI" and echo.prompts == ["hi"]


@pytest.mark.parametrize("payload,text", [
    ({"text": "a"}, "a"),
    ({"content": "b"}, "b"),
    ({"choices": [{"message": {"content": "c"}}]}, "c"),
])
def test_http_backend_reply_shapes(http_stub, payload, text):
    url, seen, set_handler = http_stub
    set_handler(lambda body: (200, payload))
    assert HttpBackend(url, key="k").complete("hello") == text
    assert seen[0] == {"body": {"prompt": "hello"}, "auth": "Bearer k"}


@pytest.mark.parametrize("status,payload", [(503, {"text": "x"}), (200, {"nothing": 1}), (200, b"<html>")])
def test_http_backend_failures(http_stub, status, payload):
    url, _, set_handler = http_stub
    set_handler(lambda body: (status, payload))
    with pytest.raises(BackendError):
        HttpBackend(url).complete("hello")


def test_http_backend_from_env(monkeypatch):
    monkeypatch.delenv("INSES_LLM_URL", raising=False)
    with pytest.raises(BackendError):
        HttpBackend.from_env()
    monkeypatch.setenv("INSES_LLM_URL", "http://example.invalid/llm")
    b = HttpBackend.from_env(timeout_s=3)
    assert b.timeout_s == 3 and b.identity == "http:http://example.invalid/llm"

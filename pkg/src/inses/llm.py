"""Text-completion backends and helpers for reading JSON out of model replies."""

from __future__ import annotations

import json
import logging
import os
from typing import Callable, Iterable, Protocol

from .errors import BackendError

logger = logging.getLogger(__name__)

JSON_ONLY_SUFFIX = "\n\nRespond with only the JSON object."


class TextBackend(Protocol):
    identity: str

    def complete(self, prompt: str) -> str: ...


class HttpBackend:
    """POST ``{"prompt": ...}`` and read ``{"text": ...}``.

    Replies shaped like an OpenAI chat completion or a bare
    ``{"content": ...}`` are accepted too.
    """

    def __init__(self, url: str, key: str | None = None, timeout_s: float = 60.0):
        self.url = url
        self.key = key
        self.timeout_s = timeout_s
        self.identity = f"http:{url}"

    @classmethod
    def from_env(cls, timeout_s: float = 60.0) -> "HttpBackend":
        url = os.environ.get("INSES_LLM_URL")
        if not url:
            raise BackendError("INSES_LLM_URL is not set")
        return cls(url, os.environ.get("INSES_LLM_KEY"), timeout_s)

    def complete(self, prompt: str) -> str:
        import requests

        headers = {"Authorization": f"Bearer {self.key}"} if self.key else {}
        try:
            resp = requests.post(self.url, json={"prompt": prompt}, headers=headers,
                                 timeout=self.timeout_s)
            resp.raise_for_status()
            body = resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise BackendError(f"LLM request failed: {exc}") from exc
        return _extract_text(body)


def _extract_text(body) -> str:
    if isinstance(body, dict):
        if isinstance(body.get("text"), str):
            return body["text"]
        if isinstance(body.get("content"), str):
            return body["content"]
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            content = None
        if isinstance(content, str):
            return content
    raise BackendError("LLM response has no text field")


class ScriptedBackend:
    """Replays canned replies in order; optionally records the prompts it saw."""

    def __init__(self, replies: Iterable[str] | Callable[[str], str], identity: str = "scripted"):
        self._fn = replies if callable(replies) else None
        self._replies = None if callable(replies) else list(replies)
        self.prompts: list[str] = []
        self.identity = identity

    def complete(self, prompt: str) -> str:
        self.prompts.append(prompt)
        if self._fn is not None:
            return self._fn(prompt)
        if not self._replies:
            raise BackendError("scripted backend has no replies left")
        return self._replies.pop(0)


def find_json_object(raw: str, strict: bool = False) -> dict | None:
    """First JSON object embedded in ``raw``, or None.

    Lenient mode scans every ``{`` so prose and code fences around the
    object are ignored. Strict mode only accepts a reply that is exactly
    one object.
    """
    if strict:
        try:
            obj = json.loads(raw)
        except (json.JSONDecodeError, RecursionError):
            return None
        return obj if isinstance(obj, dict) else None
    decoder = json.JSONDecoder()
    pos = raw.find("{")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(raw, pos)
        except (json.JSONDecodeError, RecursionError):
            obj = None
        if isinstance(obj, dict):
            return obj
        pos = raw.find("{", pos + 1)
    return None


def complete_with_retry(backend: TextBackend, prompt: str, parse: Callable[[str], object],
                        suffix: str = JSON_ONLY_SUFFIX):
    """Call, parse, and on a parse failure retry once with ``suffix`` appended.

    ``parse`` raises a ``ParseError`` subclass on failure; the second
    failure propagates.
    """
    from .errors import ParseError

    raw = backend.complete(prompt)
    try:
        return parse(raw)
    except ParseError as exc:
        logger.warning("unparseable model reply, retrying once: %s", exc)
    return parse(backend.complete(prompt + suffix))

"""Exception types shared across the engine.

Data problems (bad records, unknown ids, bad fixtures) derive from
``DataError``; anything caused by a remote model or its output derives from
``BackendError``. The CLI maps these two families to distinct exit codes.
"""

from __future__ import annotations


class InsesError(Exception):
    """Base class for every error raised by this package."""


class DataError(InsesError):
    pass


class RecordError(DataError):
    """A line-delimited input record could not be used."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class UnknownNodeError(DataError, KeyError):
    def __init__(self, node_id: str):
        super().__init__(node_id)
        self.node_id = node_id

    def __str__(self) -> str:
        return f"unknown node id: {self.node_id!r}"


class FormatVersionError(DataError):
    pass


class EmbeddingError(DataError):
    pass


class ZeroVectorError(EmbeddingError):
    pass


class MissingEmbeddingError(EmbeddingError, KeyError):
    def __init__(self, text: str):
        super().__init__(text)
        self.text = text

    def __str__(self) -> str:
        return f"no fixture embedding for text {self.text!r}"


class NoAnchorEntitiesError(DataError):
    pass


class ScriptExhaustedError(InsesError):
    pass


class BackendError(InsesError):
    """Transport-level failure talking to an LLM or embedding endpoint."""


class ParseError(BackendError):
    """A model response could not be interpreted. Carries the raw text."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class NavigationParseError(ParseError):
    pass


class AnswerParseError(ParseError):
    pass


class JudgeParseError(ParseError):
    pass


class SearchError(InsesError):
    """Search aborted mid-run; partial evidence and trace are kept."""

    def __init__(self, message: str, evidence, trace, cause: Exception | None = None):
        super().__init__(message)
        self.evidence = evidence
        self.trace = trace
        self.cause = cause


class RouteError(InsesError):
    """A pipeline failed after routing; ``route`` names the pipeline."""

    def __init__(self, route: str, cause: Exception):
        super().__init__(f"{route} pipeline failed: {cause}")
        self.route = route
        self.cause = cause

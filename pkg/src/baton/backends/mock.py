"""Deterministic scripted backend for tests and offline runs.

Tokenization is whitespace splitting, documented so tests can construct
exact-length fixtures. Script consumption is serialized behind a lock;
identical scripts plus identical request sequences yield byte-identical
results.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

from ..errors import ScriptExhausted
from .base import (
    FINISH_LENGTH,
    FINISH_STOP,
    CompletionRequest,
    CompletionResult,
    whitespace_tokens,
)

Matcher = Union[str, Callable[[str], bool]]


@dataclass
class _ScriptEntry:
    matcher: Matcher
    content: str
    consumed: bool = False

    def matches(self, text: str) -> bool:
        if callable(self.matcher):
            return bool(self.matcher(text))
        return self.matcher in text


class MockBackend:
    """Consumes scripted responses; records every request for inspection."""

    supports_assistant_continuation = True

    def __init__(
        self,
        script: Sequence[tuple[Matcher, str]] = (),
        max_in_flight: Optional[int] = None,
        latency_s: float = 0.0,
    ):
        self._entries = [_ScriptEntry(m, c) for m, c in script]
        self._lock = threading.Lock()
        self._latency_s = latency_s
        self._limit = max_in_flight
        self._in_flight = 0
        self.max_in_flight_seen = 0
        self.request_log: list[CompletionRequest] = []

    def complete(self, req: CompletionRequest) -> CompletionResult:
        with self._lock:
            self._in_flight += 1
            self.max_in_flight_seen = max(self.max_in_flight_seen, self._in_flight)
            if self._limit is not None and self._in_flight > self._limit:
                self._in_flight -= 1
                raise RuntimeError("mock in-flight limit exceeded by caller")
            self.request_log.append(req)
            text = req.flat_text()
            entry = next((e for e in self._entries if not e.consumed and e.matches(text)), None)
            if entry is not None:
                entry.consumed = True
        try:
            if self._latency_s:
                time.sleep(self._latency_s)
            if entry is None:
                raise ScriptExhausted(
                    f"no unconsumed script entry matches request "
                    f"({len(self._entries)} scripted, request head: {text[:120]!r})"
                )
            tokens = whitespace_tokens(entry.content)
            limit = req.params.max_tokens
            if len(tokens) >= limit:
                return CompletionResult(
                    content=" ".join(tokens[:limit]),
                    completion_tokens=limit,
                    finish_reason=FINISH_LENGTH,
                )
            return CompletionResult(
                content=entry.content,
                completion_tokens=len(tokens),
                finish_reason=FINISH_STOP,
            )
        finally:
            with self._lock:
                self._in_flight -= 1

    @property
    def remaining(self) -> int:
        return sum(1 for e in self._entries if not e.consumed)

    def reasoning_requests(self, system_text: str) -> list[CompletionRequest]:
        """Requests whose system message matches; handy in request-log oracles."""
        return [r for r in self.request_log if r.messages[0].content == system_text]


def mock_script(responses: Sequence[tuple[Matcher, str]], **kwargs) -> MockBackend:
    """Build a MockBackend from ordered (matcher, content) pairs."""
    return MockBackend(responses, **kwargs)


def load_script(path: Union[str, Path]) -> list[tuple[str, str]]:
    """Load a script file: JSONL of {"match": substring, "content": text}."""
    entries: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                entries.append((obj.get("match", ""), obj["content"]))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"bad script line {line_no} in {path}: {exc}") from exc
    return entries

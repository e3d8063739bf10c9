"""Record/replay cache wrapping any backend.

Cache file is JSONL of {request_hash, content, completion_tokens,
finish_reason}. A hit returns the cached result verbatim; a miss calls the
inner backend and appends the result, or fails when no inner is configured.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Optional, Union

from ..errors import CacheMiss
from .base import Backend, CompletionRequest, CompletionResult


class ReplayCachingBackend:
    supports_assistant_continuation = True

    def __init__(self, path: Union[str, Path], inner: Optional[Backend] = None):
        self.path = Path(path)
        self.inner = inner
        if inner is not None:
            self.supports_assistant_continuation = inner.supports_assistant_continuation
        self._lock = threading.Lock()
        self._cache: dict[str, CompletionResult] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                self._cache[obj["request_hash"]] = CompletionResult(
                    content=obj["content"],
                    completion_tokens=int(obj["completion_tokens"]),
                    finish_reason=obj["finish_reason"],
                )

    def complete(self, req: CompletionRequest) -> CompletionResult:
        key = req.request_hash()
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        if self.inner is None:
            raise CacheMiss(f"no cached result for request {key[:16]}… and no inner backend")
        result = self.inner.complete(req)
        record = CompletionResult(
            content=result.content,
            completion_tokens=result.completion_tokens,
            finish_reason=result.finish_reason,
        )
        with self._lock:
            self._cache[key] = record
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {
                            "request_hash": key,
                            "content": record.content,
                            "completion_tokens": record.completion_tokens,
                            "finish_reason": record.finish_reason,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        return record

"""Production HTTP client for chat-completion services.

Speaks a minimal JSON POST to {base_url}/chat/completions and reads exactly
the fields it needs; everything else in the response is ignored. Retries
network errors and 5xx/429 with exponential backoff, never 4xx.
"""

from __future__ import annotations

import os
import threading
import time
from typing import Callable, Optional

import httpx

from ..errors import BackendRejected, BackendUnreachable, BudgetRejected
from .base import (
    FINISH_LENGTH,
    FINISH_STOP,
    BackendConfig,
    CompletionRequest,
    CompletionResult,
)

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class HttpBackend:
    """Shareable across threads; a semaphore enforces the in-flight limit."""

    supports_assistant_continuation = True

    def __init__(
        self,
        config: BackendConfig,
        transport: Optional[httpx.BaseTransport] = None,
        sleep_fn: Callable[[float], None] = time.sleep,
        backoff_base_s: float = 0.5,
    ):
        self.config = config
        self._semaphore = threading.BoundedSemaphore(config.max_in_flight)
        self._sleep = sleep_fn
        self._backoff_base_s = backoff_base_s
        headers = {}
        if config.api_key_env_var_name:
            key = os.environ.get(config.api_key_env_var_name, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(
            timeout=config.timeout_seconds,
            headers=headers,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def _payload(self, req: CompletionRequest) -> dict:
        body = {
            "model": self.config.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in req.messages],
            "max_tokens": req.params.max_tokens,
            "temperature": req.params.temperature,
            "top_p": req.params.top_p,
        }
        if req.params.seed is not None:
            body["seed"] = req.params.seed
        if req.stop_sequences:
            body["stop"] = list(req.stop_sequences)
        return body

    def complete(self, req: CompletionRequest) -> CompletionResult:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        body = self._payload(req)
        attempts = self.config.retry_limit + 1
        last_exc: Optional[Exception] = None
        with self._semaphore:
            for attempt in range(attempts):
                if attempt:
                    self._sleep(self._backoff_base_s * (2 ** (attempt - 1)))
                started = time.monotonic()
                try:
                    resp = self._client.post(url, json=body)
                except httpx.HTTPError as exc:
                    last_exc = exc
                    continue
                latency_ms = (time.monotonic() - started) * 1000.0
                if resp.status_code in _RETRYABLE_STATUS:
                    last_exc = BackendRejected(resp.status_code, resp.text)
                    continue
                if resp.status_code >= 400:
                    if resp.status_code == 400 and "max_tokens" in resp.text:
                        raise BudgetRejected(resp.text[:500])
                    raise BackendRejected(resp.status_code, resp.text)
                return self._parse(resp, req, latency_ms)
        raise BackendUnreachable(f"exhausted {attempts} attempts: {last_exc}")

    def _parse(self, resp: httpx.Response, req: CompletionRequest, latency_ms: float) -> CompletionResult:
        try:
            data = resp.json()
            choice = data["choices"][0]
            content = choice["message"]["content"] or ""
            finish = choice.get("finish_reason") or FINISH_STOP
            usage = data.get("usage") or {}
            completion_tokens = int(usage.get("completion_tokens", 0))
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise BackendRejected(resp.status_code, f"unparseable response: {exc}") from exc
        if finish not in (FINISH_STOP, FINISH_LENGTH):
            finish = FINISH_STOP
        # Honor the result invariant even for servers that misreport usage.
        if finish == FINISH_LENGTH:
            completion_tokens = req.params.max_tokens
        elif completion_tokens >= req.params.max_tokens:
            finish = FINISH_LENGTH
            completion_tokens = req.params.max_tokens
        return CompletionResult(
            content=content,
            completion_tokens=completion_tokens,
            finish_reason=finish,
            latency_ms=latency_ms,
        )

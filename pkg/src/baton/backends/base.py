"""Request/response types and the backend protocol."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Protocol, runtime_checkable

from ..core import ChatTurnMessage, GenerationParams

FINISH_STOP = "stop"
FINISH_LENGTH = "length"
FINISH_ERROR = "error"


@dataclass(frozen=True)
class CompletionRequest:
    """A chat-completion call: ordered messages plus sampling parameters."""

    messages: tuple[ChatTurnMessage, ...]
    params: GenerationParams
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("request must carry at least one message")
        if self.messages[0].role != "system":
            raise ValueError("first message must have role=system")

    def flat_text(self) -> str:
        """All message contents joined; used by mock matchers."""
        return "\n".join(m.content for m in self.messages)

    def request_hash(self) -> str:
        """Stable hash over everything that determines the completion."""
        payload = {
            "messages": [[m.role, m.content] for m in self.messages],
            "temperature": self.params.temperature,
            "top_p": self.params.top_p,
            "max_tokens": self.params.max_tokens,
            "seed": self.params.seed,
            "stop": list(self.stop_sequences),
        }
        blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CompletionResult:
    """Backend reply with honest token usage."""

    content: str
    completion_tokens: int
    finish_reason: str
    latency_ms: Optional[float] = None


@dataclass(frozen=True)
class BackendConfig:
    """Connection settings for an HTTP chat-completion service."""

    base_url: str
    model_name: str
    api_key_env_var_name: str = ""
    max_in_flight: int = 8
    retry_limit: int = 3
    timeout_seconds: float = 120.0

    def __post_init__(self) -> None:
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")


@runtime_checkable
class Backend(Protocol):
    """Anything that can answer completion requests."""

    supports_assistant_continuation: bool

    def complete(self, req: CompletionRequest) -> CompletionResult: ...


def whitespace_tokens(text: str) -> list[str]:
    """The mock's documented fake tokenizer: whitespace splitting."""
    return text.split()


def count_whitespace_tokens(text: str) -> int:
    return len(text.split())

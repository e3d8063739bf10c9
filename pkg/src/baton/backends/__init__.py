from .base import (
    FINISH_ERROR,
    FINISH_LENGTH,
    FINISH_STOP,
    Backend,
    BackendConfig,
    CompletionRequest,
    CompletionResult,
    count_whitespace_tokens,
    whitespace_tokens,
)
from .cache import ReplayCachingBackend
from .http import HttpBackend
from .mock import MockBackend, load_script, mock_script

__all__ = [
    "Backend",
    "BackendConfig",
    "CompletionRequest",
    "CompletionResult",
    "FINISH_ERROR",
    "FINISH_LENGTH",
    "FINISH_STOP",
    "HttpBackend",
    "MockBackend",
    "ReplayCachingBackend",
    "count_whitespace_tokens",
    "load_script",
    "mock_script",
    "whitespace_tokens",
]

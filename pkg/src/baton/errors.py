"""Exception types shared across the engine."""

from __future__ import annotations


class BatonError(Exception):
    """Base class for all engine errors."""


class BackendUnreachable(BatonError):
    """Network-level failure that survived the retry budget."""


class BackendRejected(BatonError):
    """Backend returned a non-retryable error response."""

    def __init__(self, status: int, body: str):
        super().__init__(f"backend rejected request: status={status} body={body[:500]}")
        self.status = status
        self.body = body


class BudgetRejected(BatonError):
    """Backend refused the requested max_tokens."""


class ScriptExhausted(BatonError):
    """Mock backend has no unconsumed response matching the request."""


class BackendNoContinuationSupport(BatonError):
    """Backend rejected an assistant-prefix continuation request."""


class CacheMiss(BatonError):
    """Replay cache has no entry for the request and no inner backend."""


class DecodeTurnFailed(BatonError):
    """A backend error occurred mid-decode; carries the failing turn."""

    def __init__(self, turn_index: int, stage: str, cause: Exception):
        super().__init__(f"turn {turn_index} failed during {stage}: {cause}")
        self.turn_index = turn_index
        self.stage = stage
        self.cause = cause


class GroupTooSmall(BatonError):
    """Advantage computation needs at least two rewards."""


class KExceedsN(BatonError):
    """pass@k requested with k larger than the sample count."""


class NoEntry(BatonError):
    """Replay buffer has no summaries stored for the problem."""


class CorruptBuffer(BatonError):
    """Replay buffer file failed to parse."""

    def __init__(self, line_number: int, detail: str = ""):
        super().__init__(f"corrupt buffer at line {line_number}: {detail}")
        self.line_number = line_number


class MalformedRunDir(BatonError):
    """Run directory is missing its manifest or trajectory files."""


class DatasetError(BatonError):
    """Problem dataset failed validation."""

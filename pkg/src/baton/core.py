"""Value objects shared by every module: problems, budgets, messages, turns, trajectories, batch rows.

All types here are immutable and safe to share across concurrent tasks. Token
counts always come from backend-reported usage; the engine never re-tokenizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Optional

ROLE_SYSTEM = "system"
ROLE_USER = "user"
ROLE_ASSISTANT = "assistant"
_ROLES = (ROLE_SYSTEM, ROLE_USER, ROLE_ASSISTANT)


@dataclass(frozen=True)
class ProblemInstance:
    """One labeled or unlabeled problem from a dataset."""

    id: str
    prompt: str
    answer: Optional[str] = None
    domain: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("problem id must be nonempty")
        if not self.prompt:
            raise ValueError("problem prompt must be nonempty")


@dataclass(frozen=True)
class BudgetSpec:
    """Per-turn token budgets for an iterative decoding run.

    h_r bounds each reasoning generation, h_s each summary generation, and
    turns_t is the turn count. The effective test budget is turns_t * h_r;
    the exact spend turns_t * (h_r + h_s) is tracked separately per
    trajectory as cumulative token usage.
    """

    h_r: int
    h_s: int
    turns_t: int

    def __post_init__(self) -> None:
        if self.h_r < 1:
            raise ValueError("h_r must be >= 1")
        if self.h_s < 0:
            raise ValueError("h_s must be >= 0")
        if self.h_s >= self.h_r:
            raise ValueError("h_s must be smaller than h_r")
        if self.turns_t < 1:
            raise ValueError("turns_t must be >= 1")

    @property
    def h_test_effective(self) -> int:
        return self.turns_t * self.h_r


def effective_budget(spec: BudgetSpec) -> int:
    """Total effective reasoning budget: turns_t * h_r."""
    return spec.turns_t * spec.h_r


@dataclass(frozen=True)
class GenerationParams:
    """Sampling parameters sent with each completion request."""

    temperature: float = 1.0
    top_p: float = 1.0
    max_tokens: int = 1024
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise ValueError("top_p must lie in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    def with_max_tokens(self, max_tokens: int) -> "GenerationParams":
        return replace(self, max_tokens=max_tokens)

    def with_seed(self, seed: Optional[int]) -> "GenerationParams":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class ChatTurnMessage:
    """One role-tagged message in a backend request."""

    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in _ROLES:
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class TurnRecord:
    """Record of one decoding turn: the reasoning trace and its summary.

    summary is empty on the final turn when decoding stops after reasoning.
    terminated means a boxed final answer was detected in the reasoning.
    """

    turn_index: int
    reasoning: str
    summary: str
    reasoning_tokens: int
    summary_tokens: int
    terminated: bool
    extracted_answer: Optional[str] = None
    reasoning_finish: str = "stop"
    summary_finish: str = ""

    def __post_init__(self) -> None:
        if self.turn_index < 1:
            raise ValueError("turn_index is 1-based")
        if self.terminated != (self.extracted_answer is not None):
            raise ValueError("terminated must coincide with a present extracted_answer")


@dataclass(frozen=True)
class Trajectory:
    """Full record of one iterative decoding run over a single problem."""

    problem_id: str
    decoder: str
    budget: BudgetSpec
    turns: tuple[TurnRecord, ...]
    cumulative_tokens: tuple[int, ...]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.turns) > self.budget.turns_t:
            raise ValueError("trajectory has more turns than the budget allows")
        if len(self.cumulative_tokens) != len(self.turns):
            raise ValueError("cumulative_tokens must have one entry per turn")
        if any(b > a for a, b in zip(self.cumulative_tokens[1:], self.cumulative_tokens)):
            raise ValueError("cumulative_tokens must be nondecreasing")

    @property
    def final_output(self) -> str:
        """The run's output: the reasoning trace of the last turn."""
        return self.turns[-1].reasoning if self.turns else ""

    @property
    def final_answer(self) -> Optional[str]:
        """Last extracted answer across all turns, if any turn terminated."""
        for turn in reversed(self.turns):
            if turn.terminated:
                return turn.extracted_answer
        return None

    @property
    def total_tokens(self) -> int:
        return self.cumulative_tokens[-1] if self.cumulative_tokens else 0


@dataclass(frozen=True)
class TrainingBatchRow:
    """One conditioned rollout with its reward and group-relative advantage.

    Rows sharing a group_id share (problem_id, conditioning_text); advantages
    are standardized within the group. conditioning_kind is "summary" for
    summary-conditioned reasoning rows, "trace" for full-trace conditioning,
    and "summary_context" for rows whose optimization target is the summary
    itself.
    """

    problem_id: str
    source_turn_t: int
    conditioning_kind: str
    conditioning_text: str
    rollout_text: str
    rollout_tokens: int
    reward: float
    group_id: str
    advantage: float
    lineage_depth: int
    seed: int

    def __post_init__(self) -> None:
        if self.conditioning_kind not in ("summary", "trace", "summary_context"):
            raise ValueError(f"unknown conditioning_kind {self.conditioning_kind!r}")
        if not (0.0 <= self.reward <= 1.0):
            raise ValueError("reward must lie in [0, 1]")
        if self.source_turn_t < 1:
            raise ValueError("source_turn_t is 1-based")

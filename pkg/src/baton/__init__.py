"""baton: orchestration engine for summary-relay iterative decoding.

Run bounded reasoning turns that hand a compact summary forward instead of
the full trace, compare against full-trace and transcript-growing decoders,
export GRPO-ready training rollouts with a summary replay buffer, and
evaluate accuracy against reasoning-token budgets with analytic cost models.
"""

__version__ = "0.1.0"

from .core import (
    BudgetSpec,
    ChatTurnMessage,
    GenerationParams,
    ProblemInstance,
    TrainingBatchRow,
    Trajectory,
    TurnRecord,
    effective_budget,
)

__all__ = [
    "BudgetSpec",
    "ChatTurnMessage",
    "GenerationParams",
    "ProblemInstance",
    "TrainingBatchRow",
    "Trajectory",
    "TurnRecord",
    "effective_budget",
    "__version__",
]

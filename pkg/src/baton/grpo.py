"""Group-relative advantages and the clipped-objective diagnostic.

The engine only exports batches; nothing here backpropagates. Advantages use
the population standard deviation by default (the common reference
convention); pass sample_std=True to switch.
"""

from __future__ import annotations

import math
from typing import Sequence

from .errors import GroupTooSmall

ZERO_VARIANCE_EPS = 1e-8


def compute_advantages(rewards: Sequence[float], sample_std: bool = False) -> list[float]:
    """Standardize rewards within a group: (r - mean) / std.

    All-equal groups (std below 1e-8) get all-zero advantages rather than a
    division blowup; callers flag them as uninformative.
    """
    k = len(rewards)
    if k < 2:
        raise GroupTooSmall(f"group needs at least 2 rewards, got {k}")
    if any(not math.isfinite(r) for r in rewards):
        raise ValueError("rewards must be finite")
    mean = sum(rewards) / k
    denom = (k - 1) if sample_std else k
    var = sum((r - mean) ** 2 for r in rewards) / denom
    std = math.sqrt(var)
    if std < ZERO_VARIANCE_EPS:
        return [0.0] * k
    return [(r - mean) / std for r in rewards]


def clipped_objective_term(
    ratio: float, advantage: float, eps_low: float, eps_high: float
) -> float:
    """min(ratio*A, clip(ratio, 1-eps_low, 1+eps_high)*A).

    Diagnostic only: token-level probability ratios are supplied by the
    caller since the serving protocol exposes no logprobs.
    """
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    clipped = min(max(ratio, 1.0 - eps_low), 1.0 + eps_high)
    return min(ratio * advantage, clipped * advantage)

"""Closed-form cost, speedup, and memory formulas for attention-dominated
KV-cached decoding. Proportionality constants are dropped; values are
unitless attention-token units.

For prompt length c and generation length n, token i costs c + i, so a
single long generation costs n*c + n(n+1)/2. The relay loop bounds each
turn's context by c + h_s + h_r, giving t * h_r * (c + h_s + h_r) across t
turns and an end-to-end speedup and KV-memory ratio of
(c + t*h_r) / (c + h_s + h_r) at the same effective horizon.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator


@dataclass(frozen=True)
class CostQuery:
    c_prompt: int
    h_r: int
    h_s: int
    t_turns: int = 1
    n_total: int = 0
    gamma_train: float = 1.0
    k_group: int = 1
    n_summ: int = 1
    t_train: int = 1
    t_target: int = 1

    def __post_init__(self) -> None:
        for name in ("c_prompt", "h_r", "h_s", "n_total"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.t_turns < 1 or self.t_target < 1 or self.k_group < 1:
            raise ValueError("t_turns, t_target and k_group must be >= 1")


def ic_standard(c: int, n: int) -> int:
    """Single-trajectory cost: n*c + n(n+1)/2, exact."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return n * c + n * (n + 1) // 2


def ic_relay(c: int, h_r: int, h_s: int, t: int) -> int:
    """Relay-loop cost: t * h_r * (c + h_s + h_r)."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return t * h_r * (c + h_s + h_r)


def speedup(c: int, h_r: int, h_s: int, t: int) -> float:
    """(c + t*h_r) / (c + h_s + h_r); exactly t when c = h_s = 0."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return (c + t * h_r) / (c + h_s + h_r)


def memory_ratio(c: int, h_r: int, h_s: int, t: int) -> float:
    """KV memory ratio at the same effective horizon; same form as speedup."""
    return speedup(c, h_r, h_s, t)


def train_compute_ratio(q: CostQuery, numerator: str = "sum") -> float:
    """Relay-training cost over standard long-horizon training cost.

    Default numerator is (t_train + k_group*n_summ), matching the generation
    count per problem (t_train relay turns plus k*n_summ rollouts); the
    "product" alternative (t_train*k_group*n_summ) is kept selectable.
    """
    if numerator == "sum":
        num = q.t_train + q.k_group * q.n_summ
    elif numerator == "product":
        num = q.t_train * q.k_group * q.n_summ
    else:
        raise ValueError("numerator must be 'sum' or 'product'")
    return num / (q.k_group * q.t_target**2)


def sweep(c: int, h_r: int, h_s: int, t_max: int, t_min: int = 1) -> Iterator[dict]:
    """Rows of (t, budget, costs, speedup, memory_ratio) for CSV export."""
    if t_min < 1 or t_max < t_min:
        raise ValueError("need 1 <= t_min <= t_max")
    for t in range(t_min, t_max + 1):
        budget = t * h_r
        yield {
            "t": t,
            "budget_tokens": budget,
            "ic_standard": ic_standard(c, budget),
            "ic_relay": ic_relay(c, h_r, h_s, t),
            "speedup": speedup(c, h_r, h_s, t),
            "memory_ratio": memory_ratio(c, h_r, h_s, t),
        }

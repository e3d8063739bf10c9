"""Evaluation over stored trajectories: accuracy-vs-budget curves, pass@k,
maj@k, termination statistics, and strategy annotation.

Everything here aggregates trajectory files; nothing re-decodes, so
re-running on the same files is bit-identical. The trajectory store is one
JSON file per (problem, sample) holding the full turn record.
"""

from __future__ import annotations

import json
import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, Union

from .backends.base import Backend, CompletionRequest
from .core import BudgetSpec, ChatTurnMessage, GenerationParams, Trajectory, TurnRecord
from .errors import KExceedsN
from .prompts import PromptSet
from .reward import answers_match, normalize_answer

TRAJECTORY_SCHEMA_VERSION = 1

STRATEGY_LABELS = ("verification", "exploration", "refinement", "none")
_CATEGORY_RE = re.compile(r"^\s*CATEGORY:\s*(verification|exploration|refinement|none)\s*$")


def trajectory_to_dict(traj: Trajectory) -> dict[str, Any]:
    return {
        "schema_version": TRAJECTORY_SCHEMA_VERSION,
        "problem_id": traj.problem_id,
        "decoder": traj.decoder,
        "budget": {"h_r": traj.budget.h_r, "h_s": traj.budget.h_s, "turns_t": traj.budget.turns_t},
        "turns": [
            {
                "turn_index": t.turn_index,
                "reasoning": t.reasoning,
                "summary": t.summary,
                "reasoning_tokens": t.reasoning_tokens,
                "summary_tokens": t.summary_tokens,
                "terminated": t.terminated,
                "extracted_answer": t.extracted_answer,
                "reasoning_finish": t.reasoning_finish,
                "summary_finish": t.summary_finish,
            }
            for t in traj.turns
        ],
        "cumulative_tokens": list(traj.cumulative_tokens),
        "final_output": traj.final_output,
        "metadata": traj.metadata,
    }


def trajectory_from_dict(obj: dict[str, Any]) -> Trajectory:
    budget = BudgetSpec(**obj["budget"])
    turns = tuple(
        TurnRecord(
            turn_index=t["turn_index"],
            reasoning=t["reasoning"],
            summary=t["summary"],
            reasoning_tokens=t["reasoning_tokens"],
            summary_tokens=t["summary_tokens"],
            terminated=t["terminated"],
            extracted_answer=t.get("extracted_answer"),
            reasoning_finish=t.get("reasoning_finish", "stop"),
            summary_finish=t.get("summary_finish", ""),
        )
        for t in obj["turns"]
    )
    return Trajectory(
        problem_id=obj["problem_id"],
        decoder=obj["decoder"],
        budget=budget,
        turns=turns,
        cumulative_tokens=tuple(obj["cumulative_tokens"]),
        metadata=obj.get("metadata", {}),
    )


def save_trajectory(traj: Trajectory, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = json.dumps(trajectory_to_dict(traj), sort_keys=True, indent=2, ensure_ascii=False)
    path.write_text(blob + "\n", encoding="utf-8")


def load_trajectory(path: Union[str, Path]) -> Trajectory:
    return trajectory_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class EvalRun:
    """All trajectories of one run: n_samples per problem, equal across problems."""

    dataset_id: str
    samples: dict[str, list[Trajectory]]
    answers: dict[str, str] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        counts = {len(v) for v in self.samples.values()}
        if len(counts) > 1:
            raise ValueError(f"unequal sample counts across problems: {sorted(counts)}")

    @property
    def n_samples(self) -> int:
        return next(iter(len(v) for v in self.samples.values()), 0)

    @property
    def max_turns(self) -> int:
        return max(
            (len(t.turns) for v in self.samples.values() for t in v),
            default=0,
        )


def answer_as_of_turn(traj: Trajectory, turn: int) -> Optional[str]:
    """Last boxed answer in any turn fully completed within the first `turn`
    turns. Trajectories that stopped earlier keep their final answer."""
    upto = min(turn, len(traj.turns))
    for record in reversed(traj.turns[:upto]):
        if record.terminated:
            return record.extracted_answer
    return None


def accuracy_vs_budget(run: EvalRun) -> list[dict[str, Any]]:
    """One point per turn prefix: effective budget t*h_r, measured mean
    cumulative tokens, and mean accuracy over problems and samples."""
    points = []
    for turn in range(1, run.max_turns + 1):
        correct = 0
        total = 0
        used = []
        for pid, trajectories in sorted(run.samples.items()):
            answer = run.answers.get(pid)
            for traj in trajectories:
                upto = min(turn, len(traj.turns))
                used.append(traj.cumulative_tokens[upto - 1] if upto else 0)
                if answer is None:
                    continue
                total += 1
                extracted = answer_as_of_turn(traj, turn)
                if extracted is not None and answers_match(extracted, answer):
                    correct += 1
        h_r = next(t.budget.h_r for v in run.samples.values() for t in v)
        points.append(
            {
                "turn": turn,
                "budget_tokens": turn * h_r,
                "mean_cumulative_tokens": sum(used) / len(used) if used else 0.0,
                "accuracy": correct / total if total else 0.0,
            }
        )
    return points


def pass_at_k(per_problem_correct: Sequence[tuple[int, int]], k: int) -> float:
    """Unbiased estimator: mean over problems of 1 - C(n-c, k)/C(n, k)."""
    if not per_problem_correct:
        return 0.0
    values = []
    for n, c in per_problem_correct:
        if k > n:
            raise KExceedsN(f"k={k} exceeds n={n}")
        if c < 0 or c > n:
            raise ValueError(f"need 0 <= c <= n, got n={n} c={c}")
        values.append(1.0 - math.comb(n - c, k) / math.comb(n, k))
    return sum(values) / len(values)


def maj_at_k(
    answers: Sequence[str],
    k: int,
    rng_seed: int = 0,
    subsample: bool = False,
) -> str:
    """Plurality answer over the first k (or a seeded subsample of k)
    normalized answers. Ties go to the most frequent answer that appeared
    earliest."""
    if not answers:
        raise ValueError("answers must be nonempty")
    if k > len(answers):
        raise KExceedsN(f"k={k} exceeds {len(answers)} answers")
    if subsample:
        picked = random.Random(rng_seed).sample(list(answers), k)
    else:
        picked = list(answers)[:k]
    normalized = [normalize_answer(a) for a in picked]
    counts = Counter(normalized)
    best_count = max(counts.values())
    for candidate in normalized:
        if counts[candidate] == best_count:
            return candidate
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class TerminationStats:
    overall_rate: float
    by_length: tuple[tuple[int, float], ...]  # (reasoning length, cumulative terminated fraction)
    total_turns: int


def termination_stats(run: EvalRun) -> TerminationStats:
    """CDF of termination over reasoning lengths plus the overall rate:
    fraction of turns whose trace contains a boxed answer."""
    lengths: list[tuple[int, bool]] = []
    for trajectories in run.samples.values():
        for traj in trajectories:
            for record in traj.turns:
                lengths.append((record.reasoning_tokens, record.terminated))
    total = len(lengths)
    if total == 0:
        return TerminationStats(0.0, (), 0)
    terminated_total = sum(1 for _, term in lengths if term)
    cdf = []
    for bound in sorted({ln for ln, _ in lengths}):
        below = sum(1 for ln, term in lengths if term and ln <= bound)
        cdf.append((bound, below / total))
    return TerminationStats(terminated_total / total, tuple(cdf), total)


def parse_strategy_label(text: str) -> tuple[str, bool]:
    """Last CATEGORY line wins; unparseable verdicts map to none, flagged."""
    for line in reversed(text.splitlines()):
        m = _CATEGORY_RE.match(line)
        if m:
            return m.group(1), True
    return "none", False


@dataclass(frozen=True)
class StrategyAnnotation:
    problem_id: str
    sample_index: int
    turn_index: int  # turn whose summary conditioned the next trace
    label: str
    parsed: bool


def annotate_strategies(
    run: EvalRun,
    backend: Backend,
    prompts: PromptSet,
    params: GenerationParams,
) -> list[StrategyAnnotation]:
    """Classify every (summary, next-trace) pair with the annotator backend."""
    annotations: list[StrategyAnnotation] = []
    for pid, trajectories in sorted(run.samples.items()):
        for sample_index, traj in enumerate(trajectories):
            for record, nxt in zip(traj.turns, traj.turns[1:]):
                if not record.summary:
                    continue
                req = CompletionRequest(
                    messages=(
                        ChatTurnMessage("system", prompts.annotate_system),
                        ChatTurnMessage(
                            "user",
                            prompts.annotate_user.format(
                                summary=record.summary, reasoning=nxt.reasoning
                            ),
                        ),
                    ),
                    params=params,
                )
                try:
                    reply = backend.complete(req)
                except Exception:  # noqa: BLE001 - skip pair, keep annotating
                    annotations.append(
                        StrategyAnnotation(pid, sample_index, record.turn_index, "none", False)
                    )
                    continue
                label, parsed = parse_strategy_label(reply.content)
                annotations.append(
                    StrategyAnnotation(pid, sample_index, record.turn_index, label, parsed)
                )
    return annotations


def strategy_distribution(annotations: Sequence[StrategyAnnotation]) -> dict[str, float]:
    counts = Counter(a.label for a in annotations)
    total = len(annotations)
    return {label: counts.get(label, 0) / total if total else 0.0 for label in STRATEGY_LABELS}

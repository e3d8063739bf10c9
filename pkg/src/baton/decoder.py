"""The summary-relay decoder: alternate bounded reasoning and summarization.

Each turn generates a reasoning trace conditioned only on the problem and the
previous turn's summary (never the full prior trace), then compresses that
trace plus the previous summary into an updated summary. The final turn's
reasoning is the run's output; its summary would be unused, so by default it
is skipped.
"""

from __future__ import annotations

import itertools
from typing import Any, Optional

from .backends.base import Backend, CompletionRequest, CompletionResult
from .core import (
    BudgetSpec,
    ChatTurnMessage,
    GenerationParams,
    ProblemInstance,
    Trajectory,
    TurnRecord,
)
from .errors import DecodeTurnFailed
from .prompts import PromptSet


def detect_termination(trace: str) -> tuple[bool, Optional[str]]:
    """A trace terminates once it contains a \\boxed{...} final answer.

    Returns the contents of the last brace-balanced boxed occurrence,
    whitespace-trimmed.
    """
    starts = []
    idx = trace.find("\\boxed")
    while idx != -1:
        starts.append(idx)
        idx = trace.find("\\boxed", idx + 1)
    for start in reversed(starts):
        scan = start + len("\\boxed")
        while scan < len(trace) and trace[scan].isspace():
            scan += 1
        if scan >= len(trace) or trace[scan] != "{":
            continue
        depth = 0
        for end in range(scan, len(trace)):
            ch = trace[end]
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return True, trace[scan + 1 : end].strip()
    return False, None


def build_reasoning_request(
    prompts: PromptSet,
    problem_text: str,
    prev_summary: str,
    budget: BudgetSpec,
    params: GenerationParams,
) -> CompletionRequest:
    """Request for one reasoning turn; omits the summary block when empty."""
    if prev_summary:
        user = prompts.reasoning_user.format(problem=problem_text, summary=prev_summary)
    else:
        user = prompts.reasoning_first_user.format(problem=problem_text)
    return CompletionRequest(
        messages=(
            ChatTurnMessage("system", prompts.reasoning_system),
            ChatTurnMessage("user", user),
        ),
        params=params.with_max_tokens(budget.h_r),
    )


def build_summary_request(
    prompts: PromptSet,
    problem_text: str,
    reasoning: str,
    prev_summary: str,
    budget: BudgetSpec,
    params: GenerationParams,
) -> CompletionRequest:
    """Request compressing the current trace and prior summary."""
    if not reasoning:
        raise ValueError("cannot summarize an empty reasoning trace")
    if prev_summary:
        user = prompts.summarize_user.format(
            problem=problem_text, reasoning=reasoning, summary=prev_summary
        )
    else:
        user = prompts.summarize_first_user.format(problem=problem_text, reasoning=reasoning)
    return CompletionRequest(
        messages=(
            ChatTurnMessage("system", prompts.summarize_system_detailed),
            ChatTurnMessage("user", user),
        ),
        params=params.with_max_tokens(budget.h_s),
    )


class _SeedSequence:
    """Derives a distinct seed per backend call from one base seed."""

    def __init__(self, base: Optional[int]):
        self._base = base
        self._counter = itertools.count()

    def next(self) -> Optional[int]:
        i = next(self._counter)
        return None if self._base is None else self._base + i


def _call(backend: Backend, req: CompletionRequest, turn: int, stage: str) -> CompletionResult:
    try:
        return backend.complete(req)
    except Exception as exc:  # noqa: BLE001 - tagged and re-raised
        raise DecodeTurnFailed(turn, stage, exc) from exc


def run_summary_loop(
    problem: ProblemInstance,
    prompts: PromptSet,
    budget: BudgetSpec,
    params: GenerationParams,
    backend: Backend,
    initial_summary: str = "",
    summarize_final: bool = False,
    stop_on_stable_answer: Optional[int] = None,
    decoder_label: str = "rc",
    extra_metadata: Optional[dict[str, Any]] = None,
) -> Trajectory:
    """Run the full summary-relay loop for budget.turns_t turns.

    Termination (a boxed answer) is recorded per turn but never stops the run:
    later turns verify or explore. The optional stop_on_stable_answer=k flag
    ends the run early once the same extracted answer appears k consecutive
    turns; it is off by default.

    summarize_final=True also summarizes the last turn, which training rollout
    generation needs (it consumes one summary per turn).
    """
    seeds = _SeedSequence(params.seed)
    turns: list[TurnRecord] = []
    cumulative: list[int] = []
    total = 0
    prev_summary = initial_summary
    stable_run = 0
    stable_answer: Optional[str] = None

    for t in range(1, budget.turns_t + 1):
        req = build_reasoning_request(
            prompts, problem.prompt, prev_summary, budget, params.with_seed(seeds.next())
        )
        res = _call(backend, req, t, "reasoning")
        terminated, answer = detect_termination(res.content)

        is_last = t == budget.turns_t
        if terminated and stop_on_stable_answer is not None:
            if answer == stable_answer:
                stable_run += 1
            else:
                stable_answer, stable_run = answer, 1
            if stable_run >= stop_on_stable_answer:
                is_last = True

        summary_text = ""
        summary_tokens = 0
        summary_finish = ""
        if not is_last or summarize_final:
            sreq = build_summary_request(
                prompts, problem.prompt, res.content, prev_summary, budget,
                params.with_seed(seeds.next()),
            )
            sres = _call(backend, sreq, t, "summarize")
            summary_text = sres.content
            summary_tokens = sres.completion_tokens
            summary_finish = sres.finish_reason

        total += res.completion_tokens + summary_tokens
        turns.append(
            TurnRecord(
                turn_index=t,
                reasoning=res.content,
                summary=summary_text,
                reasoning_tokens=res.completion_tokens,
                summary_tokens=summary_tokens,
                terminated=terminated,
                extracted_answer=answer,
                reasoning_finish=res.finish_reason,
                summary_finish=summary_finish,
            )
        )
        cumulative.append(total)
        if is_last:
            break
        prev_summary = summary_text

    metadata: dict[str, Any] = {"seeded_summary": bool(initial_summary)}
    if extra_metadata:
        metadata.update(extra_metadata)
    return Trajectory(
        problem_id=problem.id,
        decoder=decoder_label,
        budget=budget,
        turns=tuple(turns),
        cumulative_tokens=tuple(cumulative),
        metadata=metadata,
    )

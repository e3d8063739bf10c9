"""Comparison iterative decoders: self-refine, self-verify, budget forcing,
chunked-carryover decoding (delethink).

Unlike the summary-relay loop, self-refine and self-verify condition each
turn on the full previous reasoning trace, so their conditioning grows to
roughly twice the per-turn budget. Delethink carries only the trailing
h_chunk tokens forward. Budget forcing grows a single transcript, appending
a continuation phrase after every boxed answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

from .backends.base import (
    FINISH_STOP,
    Backend,
    CompletionRequest,
    count_whitespace_tokens,
    whitespace_tokens,
)
from .core import (
    BudgetSpec,
    ChatTurnMessage,
    GenerationParams,
    ProblemInstance,
    Trajectory,
    TurnRecord,
)
from .decoder import _SeedSequence, _call, build_reasoning_request, detect_termination
from .errors import BackendNoContinuationSupport, BackendRejected
from .prompts import PromptSet

KIND_SELF_REFINE = "self_refine"
KIND_SELF_VERIFY = "self_verify"
KIND_BUDGET_FORCE = "budget_force"
KIND_DELETHINK = "delethink"

DEFAULT_FORCE_PHRASE = "Wait, let me continue thinking"


@dataclass(frozen=True)
class BaselineKind:
    kind: str
    h_chunk: Optional[int] = None
    force_phrase: str = DEFAULT_FORCE_PHRASE

    def __post_init__(self) -> None:
        if self.kind not in (KIND_SELF_REFINE, KIND_SELF_VERIFY, KIND_BUDGET_FORCE, KIND_DELETHINK):
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if self.h_chunk is not None and self.h_chunk < 1:
            raise ValueError("h_chunk must be positive")


def build_iterate_request(
    prompts: PromptSet,
    kind: str,
    problem_text: str,
    prev_trace: str,
    budget: BudgetSpec,
    params: GenerationParams,
) -> CompletionRequest:
    """Turn-t request conditioning on the full previous trace."""
    system = prompts.refine_system if kind == KIND_SELF_REFINE else prompts.verify_system
    user = prompts.iterate_user.format(problem=problem_text, reasoning=prev_trace)
    return CompletionRequest(
        messages=(ChatTurnMessage("system", system), ChatTurnMessage("user", user)),
        params=params.with_max_tokens(budget.h_r),
    )


def run_iterative_baseline(
    kind: BaselineKind,
    problem: ProblemInstance,
    prompts: PromptSet,
    budget: BudgetSpec,
    params: GenerationParams,
    backend: Backend,
) -> Trajectory:
    """Self-refine / self-verify: no summary step, full-trace conditioning.

    Turn 1 has no prior trace and is a plain bounded decode; this makes the
    T=1 case request-identical to the summary-relay loop at T=1.
    """
    if kind.kind not in (KIND_SELF_REFINE, KIND_SELF_VERIFY):
        raise ValueError(f"run_iterative_baseline got kind {kind.kind!r}")
    seeds = _SeedSequence(params.seed)
    turns: list[TurnRecord] = []
    cumulative: list[int] = []
    total = 0
    prev_trace = ""
    for t in range(1, budget.turns_t + 1):
        if prev_trace:
            req = build_iterate_request(
                prompts, kind.kind, problem.prompt, prev_trace, budget,
                params.with_seed(seeds.next()),
            )
        else:
            req = build_reasoning_request(
                prompts, problem.prompt, "", budget, params.with_seed(seeds.next())
            )
        res = _call(backend, req, t, "reasoning")
        terminated, answer = detect_termination(res.content)
        total += res.completion_tokens
        turns.append(
            TurnRecord(
                turn_index=t,
                reasoning=res.content,
                summary="",
                reasoning_tokens=res.completion_tokens,
                summary_tokens=0,
                terminated=terminated,
                extracted_answer=answer,
                reasoning_finish=res.finish_reason,
            )
        )
        cumulative.append(total)
        prev_trace = res.content
    return Trajectory(
        problem_id=problem.id,
        decoder=kind.kind,
        budget=budget,
        turns=tuple(turns),
        cumulative_tokens=tuple(cumulative),
        metadata={},
    )


def run_budget_force(
    problem: ProblemInstance,
    prompts: PromptSet,
    budget: BudgetSpec,
    params: GenerationParams,
    backend: Backend,
    force_phrase: str = DEFAULT_FORCE_PHRASE,
) -> Trajectory:
    """One growing transcript; a continuation phrase follows every boxed answer.

    Uses assistant-prefix continuation when the backend supports it; otherwise
    falls back to re-sending the transcript as a user message with a continue
    frame, flagged in trajectory metadata since it changes the conditioning
    distribution. Phrase tokens count against the budget: they occupy context.
    """
    seeds = _SeedSequence(params.seed)
    h_test = budget.h_test_effective
    base_user = prompts.reasoning_first_user.format(problem=problem.prompt)
    system_msg = ChatTurnMessage("system", prompts.reasoning_system)
    user_framed = not backend.supports_assistant_continuation

    transcript = ""
    appends = 0
    total = 0
    turns: list[TurnRecord] = []
    cumulative: list[int] = []

    for t in range(1, budget.turns_t + 1):
        if not transcript:
            messages = (system_msg, ChatTurnMessage("user", base_user))
        elif user_framed:
            messages = (
                system_msg,
                ChatTurnMessage("user", base_user + "\n\n[TRANSCRIPT SO FAR]\n" + transcript
                                + "\n\nContinue the reasoning from where it stops."),
            )
        else:
            messages = (
                system_msg,
                ChatTurnMessage("user", base_user),
                ChatTurnMessage("assistant", transcript),
            )
        req = CompletionRequest(messages=messages, params=params.with_max_tokens(budget.h_r).with_seed(seeds.next()))
        try:
            res = _call(backend, req, t, "reasoning")
        except Exception as exc:
            cause = getattr(exc, "cause", None)
            if transcript and not user_framed and isinstance(cause, BackendRejected):
                raise BackendNoContinuationSupport(
                    "backend rejected assistant-prefix continuation"
                ) from exc
            raise
        terminated, answer = detect_termination(res.content)
        transcript = (transcript + "\n" + res.content) if transcript else res.content
        total += res.completion_tokens
        if terminated and appends < budget.turns_t:
            transcript = transcript + "\n" + force_phrase
            appends += 1
            total += count_whitespace_tokens(force_phrase)
        turns.append(
            TurnRecord(
                turn_index=t,
                reasoning=res.content,
                summary="",
                reasoning_tokens=res.completion_tokens,
                summary_tokens=0,
                terminated=terminated,
                extracted_answer=answer,
                reasoning_finish=res.finish_reason,
            )
        )
        cumulative.append(total)
        if total >= h_test:
            break
    return Trajectory(
        problem_id=problem.id,
        decoder=KIND_BUDGET_FORCE,
        budget=budget,
        turns=tuple(turns),
        cumulative_tokens=tuple(cumulative),
        metadata={
            "transcript": transcript,
            "force_phrase": force_phrase,
            "force_appends": appends,
            "continuation_mode": "user_framed" if user_framed else "assistant_prefix",
        },
    )


def run_delethink(
    problem: ProblemInstance,
    prompts: PromptSet,
    budget: BudgetSpec,
    params: GenerationParams,
    backend: Backend,
    h_chunk: Optional[int] = None,
) -> Trajectory:
    """Chunked decoding: each turn conditions on the trailing h_chunk tokens
    of the previous trace, until an end-of-sequence finish or T turns.

    The carryover suffix is taken in whitespace-token space since the wire
    protocol reports no token offsets; trajectory metadata records this.
    """
    if h_chunk is None:
        h_chunk = budget.h_r // 2
    if not (0 < h_chunk <= budget.h_r):
        raise ValueError("h_chunk must lie in (0, h_r]")
    seeds = _SeedSequence(params.seed)
    turns: list[TurnRecord] = []
    cumulative: list[int] = []
    total = 0
    carryover = ""
    for t in range(1, budget.turns_t + 1):
        if carryover:
            user = prompts.delethink_user.format(problem=problem.prompt, carryover=carryover)
            req = CompletionRequest(
                messages=(
                    ChatTurnMessage("system", prompts.reasoning_system),
                    ChatTurnMessage("user", user),
                ),
                params=params.with_max_tokens(budget.h_r).with_seed(seeds.next()),
            )
        else:
            req = build_reasoning_request(
                prompts, problem.prompt, "", budget, params.with_seed(seeds.next())
            )
        res = _call(backend, req, t, "reasoning")
        terminated, answer = detect_termination(res.content)
        total += res.completion_tokens
        turns.append(
            TurnRecord(
                turn_index=t,
                reasoning=res.content,
                summary="",
                reasoning_tokens=res.completion_tokens,
                summary_tokens=0,
                terminated=terminated,
                extracted_answer=answer,
                reasoning_finish=res.finish_reason,
            )
        )
        cumulative.append(total)
        if res.finish_reason == FINISH_STOP:
            break
        carryover = " ".join(whitespace_tokens(res.content)[-h_chunk:])
    return Trajectory(
        problem_id=problem.id,
        decoder=KIND_DELETHINK,
        budget=budget,
        turns=tuple(turns),
        cumulative_tokens=tuple(cumulative),
        metadata={"h_chunk": h_chunk, "carryover_space": "whitespace"},
    )

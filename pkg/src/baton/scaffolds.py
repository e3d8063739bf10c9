"""Test-time scaffolds: recursive pool aggregation and a generate-verify-refine agent.

Both scaffolds can use either plain bounded decoding or the summary-relay
loop as the inner solver. Calls within a round can run concurrently
(max_workers); results are slotted by index so transcripts stay deterministic
under a fixed rng seed and scripted backend.
"""

from __future__ import annotations

import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence, TypeVar

from .backends.base import Backend, CompletionRequest
from .core import BudgetSpec, ChatTurnMessage, GenerationParams, ProblemInstance
from .decoder import build_reasoning_request, run_summary_loop
from .prompts import PromptSet

INNER_PLAIN = "plain"
INNER_RC = "rc"

_T = TypeVar("_T")
_U = TypeVar("_U")

_SCORE_RE = re.compile(r"^\s*SCORE:\s*(0(?:\.0)?|0\.5|1(?:\.0)?)\s*$")


@dataclass(frozen=True)
class RsaConfig:
    """Constant-size solution pool, aggregated over successive rounds."""

    pool_m: int
    sample_k: int
    rounds: int
    inner: str = INNER_PLAIN
    rc_budget: Optional[BudgetSpec] = None

    def __post_init__(self) -> None:
        if self.pool_m < 1 or self.sample_k < 1 or self.rounds < 1:
            raise ValueError("pool_m, sample_k and rounds must be >= 1")
        if self.sample_k > self.pool_m:
            raise ValueError("sample_k must not exceed pool_m")
        if self.inner not in (INNER_PLAIN, INNER_RC):
            raise ValueError(f"unknown inner solver {self.inner!r}")
        if self.inner == INNER_RC and self.rc_budget is None:
            raise ValueError("inner=rc requires rc_budget")


@dataclass(frozen=True)
class DsmConfig:
    """Generate n_gen candidates, verify with n_verify calls each, refine the best."""

    n_gen: int
    n_verify: int
    rounds: int
    inner: str = INNER_PLAIN
    rc_budget: Optional[BudgetSpec] = None

    def __post_init__(self) -> None:
        if self.n_gen < 1 or self.n_verify < 1 or self.rounds < 1:
            raise ValueError("n_gen, n_verify and rounds must be >= 1")
        if self.inner not in (INNER_PLAIN, INNER_RC):
            raise ValueError(f"unknown inner solver {self.inner!r}")
        if self.inner == INNER_RC and self.rc_budget is None:
            raise ValueError("inner=rc requires rc_budget")


def _map_indexed(fn: Callable[[_T], _U], items: Sequence[_T], max_workers: int) -> list[_U]:
    """Apply fn preserving input order; optionally in parallel."""
    if max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


def _plain_request(prompts: PromptSet, problem_text: str, params: GenerationParams) -> CompletionRequest:
    return CompletionRequest(
        messages=(
            ChatTurnMessage("system", prompts.reasoning_system),
            ChatTurnMessage("user", prompts.reasoning_first_user.format(problem=problem_text)),
        ),
        params=params,
    )


def _generate_solution(
    problem: ProblemInstance,
    prompts: PromptSet,
    params: GenerationParams,
    backend: Backend,
    inner: str,
    rc_budget: Optional[BudgetSpec],
    initial_summary: str = "",
) -> str:
    if inner == INNER_RC:
        traj = run_summary_loop(
            problem, prompts, rc_budget, params, backend, initial_summary=initial_summary
        )
        return traj.final_output
    if initial_summary:
        req = build_reasoning_request(
            prompts, problem.prompt, initial_summary, _plain_budget(params), params
        )
    else:
        req = _plain_request(prompts, problem.prompt, params)
    return backend.complete(req).content


def _plain_budget(params: GenerationParams) -> BudgetSpec:
    # Single-call pseudo-budget so build_reasoning_request can set max_tokens.
    return BudgetSpec(h_r=params.max_tokens, h_s=0, turns_t=1)


def candidate_blocks(candidates: Sequence[str]) -> str:
    return "\n\n".join(
        f"[CANDIDATE {i + 1}]\n{text}" for i, text in enumerate(candidates)
    )


def run_rsa(
    problem: ProblemInstance,
    cfg: RsaConfig,
    prompts: PromptSet,
    params: GenerationParams,
    backend: Backend,
    rng_seed: int = 0,
    max_workers: int = 1,
) -> tuple[list[str], list[dict[str, Any]]]:
    """Round 0 samples pool_m solutions from scratch; every later round
    rebuilds the pool by aggregating sample_k members drawn uniformly with
    replacement. The pool holds exactly pool_m solutions after every round.

    With inner=rc the aggregated solution seeds the relay loop as its initial
    conditioning summary.
    """
    rng = random.Random(rng_seed)
    transcript: list[dict[str, Any]] = []

    def initial(_: int) -> str:
        return _generate_solution(problem, prompts, params, backend, cfg.inner, cfg.rc_budget)

    pool = _map_indexed(initial, list(range(cfg.pool_m)), max_workers)
    transcript.append({"round": 0, "kind": "init", "pool": list(pool)})

    for round_idx in range(1, cfg.rounds):
        picks = [[rng.randrange(cfg.pool_m) for _ in range(cfg.sample_k)] for _ in range(cfg.pool_m)]

        def build_member(member_picks: list[int]) -> str:
            chosen = [pool[i] for i in member_picks]
            req = CompletionRequest(
                messages=(
                    ChatTurnMessage("system", prompts.aggregate_system),
                    ChatTurnMessage(
                        "user",
                        prompts.aggregate_user.format(
                            problem=problem.prompt, candidates=candidate_blocks(chosen)
                        ),
                    ),
                ),
                params=params,
            )
            aggregated = backend.complete(req).content
            if cfg.inner == INNER_RC:
                return _generate_solution(
                    problem, prompts, params, backend, cfg.inner, cfg.rc_budget,
                    initial_summary=aggregated,
                )
            return aggregated

        pool = _map_indexed(build_member, picks, max_workers)
        transcript.append({"round": round_idx, "kind": "aggregate", "picks": picks, "pool": list(pool)})
    return pool, transcript


def parse_verification_score(text: str) -> tuple[float, bool]:
    """Parse the last 'SCORE: 0.0|0.5|1.0' line; unparseable scores as 0.0."""
    for line in reversed(text.splitlines()):
        m = _SCORE_RE.match(line)
        if m:
            return float(m.group(1)), True
    return 0.0, False


@dataclass
class _Candidate:
    text: str
    verifications: list[str] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)
    flagged: int = 0

    @property
    def score(self) -> float:
        return sum(self.scores) / len(self.scores) if self.scores else 0.0


def run_dsm(
    problem: ProblemInstance,
    cfg: DsmConfig,
    prompts: PromptSet,
    params: GenerationParams,
    backend: Backend,
    rng_seed: int = 0,
    max_workers: int = 1,
) -> tuple[str, float, list[dict[str, Any]]]:
    """Generate, verify, refine. Verification verdicts map to {0.0, 0.5, 1.0}
    and average over n_verify calls; each refinement round improves the
    current best candidate using its lowest-scoring verification as feedback,
    re-verifying only the new candidate. Stops early on a perfect average.
    Ties in the final argmax go to the earliest-generated candidate.
    """
    del rng_seed  # draws nothing today; kept for interface stability
    transcript: list[dict[str, Any]] = []

    def verify(candidate: _Candidate) -> None:
        def one(_: int) -> str:
            req = CompletionRequest(
                messages=(
                    ChatTurnMessage("system", prompts.dsm_verify_system),
                    ChatTurnMessage(
                        "user",
                        prompts.dsm_verify_user.format(
                            problem=problem.prompt, solution=candidate.text
                        ),
                    ),
                ),
                params=params,
            )
            return backend.complete(req).content
        replies = _map_indexed(one, list(range(cfg.n_verify)), max_workers)
        for reply in replies:
            value, ok = parse_verification_score(reply)
            candidate.verifications.append(reply)
            candidate.scores.append(value)
            if not ok:
                candidate.flagged += 1

    def generate(_: int) -> _Candidate:
        return _Candidate(
            _generate_solution(problem, prompts, params, backend, cfg.inner, cfg.rc_budget)
        )

    pool = _map_indexed(generate, list(range(cfg.n_gen)), max_workers)
    for candidate in pool:
        verify(candidate)
    transcript.append({"round": 0, "kind": "init", "scores": [c.score for c in pool]})

    for round_idx in range(1, cfg.rounds + 1):
        best = max(pool, key=lambda c: c.score)  # max is stable: earliest wins ties
        if best.score >= 1.0:
            transcript.append({"round": round_idx, "kind": "early_exit", "score": best.score})
            break
        worst_idx = min(range(len(best.scores)), key=lambda i: best.scores[i])
        feedback = best.verifications[worst_idx]
        req = CompletionRequest(
            messages=(
                ChatTurnMessage("system", prompts.dsm_refine_system),
                ChatTurnMessage(
                    "user",
                    prompts.dsm_refine_user.format(
                        problem=problem.prompt, solution=best.text, feedback=feedback
                    ),
                ),
            ),
            params=params,
        )
        refined = _Candidate(backend.complete(req).content)
        verify(refined)
        pool.append(refined)
        transcript.append(
            {"round": round_idx, "kind": "refine", "refined_score": refined.score,
             "scores": [c.score for c in pool]}
        )

    best = max(pool, key=lambda c: c.score)
    return best.text, best.score, transcript

"""Training-batch generation: run the relay loop, sample unique summaries,
generate K conditioned rollouts per summary, score, and standardize
advantages per group. Also the full-trace and summary-target variants.

Modes:
  rc              reasoning rollouts conditioned on sampled summaries (default)
  baseline_trace  reasoning rollouts conditioned on full prior traces
  summary_reward  candidate summaries rewarded by downstream rollout success
  both            summary_reward rows plus the downstream reasoning groups
"""

from __future__ import annotations

import hashlib
import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence, Union

from .backends.base import Backend
from .baselines import BaselineKind, build_iterate_request, run_iterative_baseline
from .core import BudgetSpec, GenerationParams, ProblemInstance, TrainingBatchRow
from .decoder import build_reasoning_request, build_summary_request, run_summary_loop
from .errors import BatonError, DatasetError
from .grpo import compute_advantages
from .prompts import PromptSet
from .replay import ReplayBuffer
from .reward import score

MODE_RC = "rc"
MODE_BASELINE_TRACE = "baseline_trace"
MODE_SUMMARY_REWARD = "summary_reward"
MODE_BOTH = "both"

BATCH_SCHEMA_VERSION = 1

ROW_FIELDS = (
    "problem_id",
    "source_turn_t",
    "conditioning_kind",
    "conditioning_text",
    "rollout_text",
    "rollout_tokens",
    "reward",
    "group_id",
    "advantage",
    "lineage_depth",
    "seed",
)


@dataclass(frozen=True)
class RolloutConfig:
    t_train: int
    n_summ: int
    k_group: int
    budget: BudgetSpec
    mode: str = MODE_RC
    use_replay: bool = False
    epoch: int = 1
    baseline_kind: str = "self_refine"

    def __post_init__(self) -> None:
        if self.t_train < 1:
            raise ValueError("t_train must be >= 1")
        if not (1 <= self.n_summ <= self.t_train):
            raise ValueError("n_summ must lie in [1, t_train]")
        if self.k_group < 2:
            raise ValueError("k_group must be >= 2")
        if self.mode not in (MODE_RC, MODE_BASELINE_TRACE, MODE_SUMMARY_REWARD, MODE_BOTH):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.epoch < 1:
            raise ValueError("epoch is 1-based")


@dataclass
class BatchResult:
    rows: list[TrainingBatchRow]
    skipped: list[tuple[str, str]] = field(default_factory=list)
    zero_variance_groups: list[str] = field(default_factory=list)
    fresh_start_problems: list[str] = field(default_factory=list)

    @property
    def group_ids(self) -> list[str]:
        seen: list[str] = []
        for row in self.rows:
            if row.group_id not in seen:
                seen.append(row.group_id)
        return seen


def _group_id(seed: int, problem_id: str, epoch: int, turn: int, text: str, tag: str = "") -> str:
    blob = f"{seed}:{problem_id}:{epoch}:{turn}:{tag}:{text}"
    return hashlib.sha1(blob.encode("utf-8")).hexdigest()[:16]


def _rollout_seed(params: GenerationParams, offset: int) -> Optional[int]:
    return None if params.seed is None else params.seed + offset


def _dedup_keep_first(pairs: Sequence[tuple[int, str]]) -> list[tuple[int, str]]:
    seen: set[str] = set()
    out: list[tuple[int, str]] = []
    for turn, text in pairs:
        if text not in seen:
            seen.add(text)
            out.append((turn, text))
    return out


def _complete_many(backend: Backend, requests: Sequence, max_workers: int):
    if max_workers <= 1 or len(requests) <= 1:
        return [backend.complete(r) for r in requests]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(backend.complete, requests))


def generate_batch(
    problems: Sequence[ProblemInstance],
    cfg: RolloutConfig,
    buffer: Optional[ReplayBuffer],
    prompts: PromptSet,
    params: GenerationParams,
    backend: Backend,
    rng_seed: int = 0,
    max_workers: int = 1,
) -> BatchResult:
    """Dispatch on cfg.mode. Backend failures skip the problem with a
    diagnostic; zero-variance groups are emitted with zero advantages and
    flagged."""
    if cfg.mode == MODE_RC:
        return _generate_rc(problems, cfg, buffer, prompts, params, backend, rng_seed, max_workers)
    if cfg.mode == MODE_BASELINE_TRACE:
        return _generate_baseline(problems, cfg, prompts, params, backend, rng_seed, max_workers)
    return _generate_summary_reward(problems, cfg, prompts, params, backend, rng_seed, max_workers)


def _require_answer(problem: ProblemInstance) -> str:
    if not problem.answer:
        raise DatasetError(f"problem {problem.id!r} has no answer; rollout generation needs labels")
    return problem.answer


def _generate_rc(
    problems: Sequence[ProblemInstance],
    cfg: RolloutConfig,
    buffer: Optional[ReplayBuffer],
    prompts: PromptSet,
    params: GenerationParams,
    backend: Backend,
    rng_seed: int,
    max_workers: int,
) -> BatchResult:
    result = BatchResult(rows=[])
    run_budget = replace(cfg.budget, turns_t=cfg.t_train)
    for problem in problems:
        answer = _require_answer(problem)
        prng = random.Random(f"{rng_seed}:{problem.id}:{cfg.epoch}")
        try:
            seed_summary, parent_depth = "", 0
            if cfg.use_replay and buffer is not None:
                if problem.id in buffer:
                    seed_summary, parent_depth = buffer.sample(problem.id)
                else:
                    result.fresh_start_problems.append(problem.id)

            traj = run_summary_loop(
                problem, prompts, run_budget, params, backend,
                initial_summary=seed_summary, summarize_final=True,
            )
            turn_summaries = [(t.turn_index, t.summary) for t in traj.turns if t.summary]
            if buffer is not None and turn_summaries:
                buffer.insert(
                    problem.id,
                    [(text, turn) for turn, text in turn_summaries],
                    parent_depth=parent_depth,
                    epoch=cfg.epoch,
                )

            unique = _dedup_keep_first(turn_summaries)
            chosen = prng.sample(unique, min(cfg.n_summ, len(unique)))
            for turn, summary in chosen:
                gid = _group_id(rng_seed, problem.id, cfg.epoch, turn, summary)
                requests = [
                    build_reasoning_request(
                        prompts, problem.prompt, summary, cfg.budget,
                        params.with_seed(_rollout_seed(params, j)),
                    )
                    for j in range(cfg.k_group)
                ]
                results = _complete_many(backend, requests, max_workers)
                rewards = [score(r.content, answer).reward for r in results]
                advantages = compute_advantages(rewards)
                if all(r == rewards[0] for r in rewards):
                    result.zero_variance_groups.append(gid)
                for res, rew, adv in zip(results, rewards, advantages):
                    result.rows.append(
                        TrainingBatchRow(
                            problem_id=problem.id,
                            source_turn_t=turn,
                            conditioning_kind="summary",
                            conditioning_text=summary,
                            rollout_text=res.content,
                            rollout_tokens=res.completion_tokens,
                            reward=rew,
                            group_id=gid,
                            advantage=adv,
                            lineage_depth=parent_depth + turn,
                            seed=rng_seed,
                        )
                    )
        except BatonError as exc:
            result.skipped.append((problem.id, str(exc)))
    return result


def _generate_baseline(
    problems: Sequence[ProblemInstance],
    cfg: RolloutConfig,
    prompts: PromptSet,
    params: GenerationParams,
    backend: Backend,
    rng_seed: int,
    max_workers: int,
) -> BatchResult:
    """Full-trace conditioning: same pipeline, traces instead of summaries."""
    result = BatchResult(rows=[])
    run_budget = replace(cfg.budget, turns_t=cfg.t_train)
    kind = BaselineKind(cfg.baseline_kind)
    for problem in problems:
        answer = _require_answer(problem)
        prng = random.Random(f"{rng_seed}:{problem.id}:{cfg.epoch}")
        try:
            traj = run_iterative_baseline(kind, problem, prompts, run_budget, params, backend)
            traces = [(t.turn_index, t.reasoning) for t in traj.turns if t.reasoning]
            unique = _dedup_keep_first(traces)
            chosen = prng.sample(unique, min(cfg.n_summ, len(unique)))
            for turn, trace in chosen:
                gid = _group_id(rng_seed, problem.id, cfg.epoch, turn, trace, tag="trace")
                requests = [
                    build_iterate_request(
                        prompts, kind.kind, problem.prompt, trace, cfg.budget,
                        params.with_seed(_rollout_seed(params, j)),
                    )
                    for j in range(cfg.k_group)
                ]
                results = _complete_many(backend, requests, max_workers)
                rewards = [score(r.content, answer).reward for r in results]
                advantages = compute_advantages(rewards)
                if all(r == rewards[0] for r in rewards):
                    result.zero_variance_groups.append(gid)
                for res, rew, adv in zip(results, rewards, advantages):
                    result.rows.append(
                        TrainingBatchRow(
                            problem_id=problem.id,
                            source_turn_t=turn,
                            conditioning_kind="trace",
                            conditioning_text=trace,
                            rollout_text=res.content,
                            rollout_tokens=res.completion_tokens,
                            reward=rew,
                            group_id=gid,
                            advantage=adv,
                            lineage_depth=turn,
                            seed=rng_seed,
                        )
                    )
        except BatonError as exc:
            result.skipped.append((problem.id, str(exc)))
    return result


def _generate_summary_reward(
    problems: Sequence[ProblemInstance],
    cfg: RolloutConfig,
    prompts: PromptSet,
    params: GenerationParams,
    backend: Backend,
    rng_seed: int,
    max_workers: int,
) -> BatchResult:
    """Summary-target rows: each candidate summary's reward is the fraction of
    its k_group downstream rollouts that answer correctly. Advantages are
    standardized across the k_group candidate summaries sharing a context.
    In `both` mode the downstream rollouts are also emitted as reasoning
    groups."""
    result = BatchResult(rows=[])
    emit_reasoning = cfg.mode == MODE_BOTH
    run_budget = replace(cfg.budget, turns_t=cfg.t_train)
    for problem in problems:
        answer = _require_answer(problem)
        prng = random.Random(f"{rng_seed}:{problem.id}:{cfg.epoch}:summ")
        try:
            traj = run_summary_loop(
                problem, prompts, run_budget, params, backend, summarize_final=True
            )
            turn_count = len(traj.turns)
            picked_turns = sorted(prng.sample(range(1, turn_count + 1), min(cfg.n_summ, turn_count)))
            for turn in picked_turns:
                record = traj.turns[turn - 1]
                prev_summary = traj.turns[turn - 2].summary if turn >= 2 else ""
                context_req = build_summary_request(
                    prompts, problem.prompt, record.reasoning, prev_summary, cfg.budget, params
                )
                context_text = context_req.messages[-1].content

                candidate_reqs = [
                    build_summary_request(
                        prompts, problem.prompt, record.reasoning, prev_summary, cfg.budget,
                        params.with_seed(_rollout_seed(params, j)),
                    )
                    for j in range(cfg.k_group)
                ]
                candidates = _complete_many(backend, candidate_reqs, max_workers)

                summary_rewards: list[float] = []
                downstream_bundles = []
                for c_idx, cand in enumerate(candidates):
                    reqs = [
                        build_reasoning_request(
                            prompts, problem.prompt, cand.content, cfg.budget,
                            params.with_seed(_rollout_seed(params, 100 + c_idx * cfg.k_group + j)),
                        )
                        for j in range(cfg.k_group)
                    ]
                    downstream = _complete_many(backend, reqs, max_workers)
                    rewards = [score(r.content, answer).reward for r in downstream]
                    summary_rewards.append(sum(rewards) / len(rewards))
                    downstream_bundles.append((downstream, rewards))

                gid = _group_id(rng_seed, problem.id, cfg.epoch, turn, context_text, tag="summ")
                advantages = compute_advantages(summary_rewards)
                if all(r == summary_rewards[0] for r in summary_rewards):
                    result.zero_variance_groups.append(gid)
                for cand, rew, adv in zip(candidates, summary_rewards, advantages):
                    result.rows.append(
                        TrainingBatchRow(
                            problem_id=problem.id,
                            source_turn_t=turn,
                            conditioning_kind="summary_context",
                            conditioning_text=context_text,
                            rollout_text=cand.content,
                            rollout_tokens=cand.completion_tokens,
                            reward=rew,
                            group_id=gid,
                            advantage=adv,
                            lineage_depth=turn,
                            seed=rng_seed,
                        )
                    )

                if emit_reasoning:
                    for c_idx, (cand, (downstream, rewards)) in enumerate(
                        zip(candidates, downstream_bundles)
                    ):
                        sub_gid = _group_id(
                            rng_seed, problem.id, cfg.epoch, turn, cand.content, tag=f"down{c_idx}"
                        )
                        sub_adv = compute_advantages(rewards)
                        if all(r == rewards[0] for r in rewards):
                            result.zero_variance_groups.append(sub_gid)
                        for res, rew, adv in zip(downstream, rewards, sub_adv):
                            result.rows.append(
                                TrainingBatchRow(
                                    problem_id=problem.id,
                                    source_turn_t=turn,
                                    conditioning_kind="summary",
                                    conditioning_text=cand.content,
                                    rollout_text=res.content,
                                    rollout_tokens=res.completion_tokens,
                                    reward=rew,
                                    group_id=sub_gid,
                                    advantage=adv,
                                    lineage_depth=turn,
                                    seed=rng_seed,
                                )
                            )
        except BatonError as exc:
            result.skipped.append((problem.id, str(exc)))
    return result


def generate_batch_summary_reward(
    problems: Sequence[ProblemInstance],
    cfg: RolloutConfig,
    prompts: PromptSet,
    params: GenerationParams,
    backend: Backend,
    rng_seed: int = 0,
    max_workers: int = 1,
) -> BatchResult:
    if cfg.mode not in (MODE_SUMMARY_REWARD, MODE_BOTH):
        raise ValueError("generate_batch_summary_reward needs mode summary_reward or both")
    return _generate_summary_reward(problems, cfg, prompts, params, backend, rng_seed, max_workers)


def generate_batch_baseline(
    problems: Sequence[ProblemInstance],
    cfg: RolloutConfig,
    prompts: PromptSet,
    params: GenerationParams,
    backend: Backend,
    rng_seed: int = 0,
    max_workers: int = 1,
) -> BatchResult:
    if cfg.mode != MODE_BASELINE_TRACE:
        raise ValueError("generate_batch_baseline needs mode baseline_trace")
    return _generate_baseline(problems, cfg, prompts, params, backend, rng_seed, max_workers)


def row_to_dict(row: TrainingBatchRow) -> dict[str, Any]:
    return {name: getattr(row, name) for name in ROW_FIELDS}


def write_batch_jsonl(rows: Sequence[TrainingBatchRow], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row_to_dict(row), ensure_ascii=False) + "\n")


def load_batch_jsonl(path: Union[str, Path]) -> list[TrainingBatchRow]:
    rows: list[TrainingBatchRow] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            rows.append(TrainingBatchRow(**{name: obj[name] for name in ROW_FIELDS}))
    return rows


def batch_manifest(
    cfg: RolloutConfig,
    prompts: PromptSet,
    result: BatchResult,
    rng_seed: int,
) -> dict[str, Any]:
    """Sidecar manifest written next to each exported batch."""
    return {
        "schema_version": BATCH_SCHEMA_VERSION,
        "mode": cfg.mode,
        "t_train": cfg.t_train,
        "n_summ": cfg.n_summ,
        "k_group": cfg.k_group,
        "budget": {"h_r": cfg.budget.h_r, "h_s": cfg.budget.h_s, "turns_t": cfg.budget.turns_t},
        "use_replay": cfg.use_replay,
        "epoch": cfg.epoch,
        "seed": rng_seed,
        "rows": len(result.rows),
        "groups": len(result.group_ids),
        "zero_variance_groups": len(result.zero_variance_groups),
        "skipped_problems": [pid for pid, _ in result.skipped],
        "fresh_start_problems": result.fresh_start_problems,
        "template_hashes": prompts.template_hashes(),
    }

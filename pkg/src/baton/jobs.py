"""Run orchestration: decode jobs, rollout-export jobs, evaluation, cost
sweeps, and the two annotation recipes. This is the layer the HTTP service
wraps; the CLI reaches it through the service.

Output tree per run:
    run/
      manifest.json
      trajectories/*.json
      metrics/*.csv
      batches/*.jsonl (+ .manifest.json sidecars)
      buffer.jsonl

Every job is resumable: existing outputs that parse cleanly are skipped.
All randomness flows from the manifest seed; per-task seeds are derived by
hashing (seed, problem_id, sample), so results do not depend on worker
scheduling.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Optional, Union

from . import baselines, costs, evaluation, rollouts, scaffolds
from .backends import HttpBackend, MockBackend, ReplayCachingBackend
from .backends.base import Backend, BackendConfig, CompletionRequest, CompletionResult
from .backends.mock import load_script
from .core import BudgetSpec, GenerationParams, ProblemInstance, Trajectory, TurnRecord
from .datasets import load_problems
from .decoder import detect_termination, run_summary_loop
from .errors import BatonError, MalformedRunDir
from .prompts import DEFAULT_SUMMARY_DETAIL, PromptSet, load_prompt_set
from .replay import ReplayBuffer
from .reward import answers_match, normalize_answer, score

MANIFEST_SCHEMA_VERSION = 1

DECODER_KINDS = ("rc", "self_refine", "self_verify", "budget_force", "delethink", "rsa", "dsm")

# Defaults for the headline evaluation protocol.
DEFAULT_BUDGET = {"h_r": 16384, "h_s": 2048, "turns_t": 12}
DEFAULT_PARAMS = {"temperature": 1.0, "top_p": 1.0}
DEFAULT_SAMPLES = 16
DEFAULT_ROLLOUTS = {"t_train": 3, "n_summ": 2, "k_group": 8}


def _derived_seed(seed: int, *parts: Any) -> int:
    blob = ":".join([str(seed), *map(str, parts)])
    return int(hashlib.sha256(blob.encode("utf-8")).hexdigest()[:8], 16)


def _sanitize_id(problem_id: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9._-]", "_", problem_id)[:80]
    tag = hashlib.sha1(problem_id.encode("utf-8")).hexdigest()[:8]
    return f"{safe}--{tag}"


def trajectory_filename(problem_id: str, sample_index: int) -> str:
    return f"{_sanitize_id(problem_id)}__s{sample_index:03d}.json"


class _CountingBackend:
    """Accumulates completion-token usage across calls for scaffold records."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.supports_assistant_continuation = inner.supports_assistant_continuation
        self.total_tokens = 0
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, req: CompletionRequest) -> CompletionResult:
        res = self.inner.complete(req)
        with self._lock:
            self.total_tokens += res.completion_tokens
            self.calls += 1
        return res


def backend_factory(spec: dict[str, Any]) -> Callable[[], Backend]:
    """Builds backends from a config mapping.

    kinds:
      mock   {"kind": "mock", "script": path}           fresh instance per task
      http   {"kind": "http", "base_url", "model", ...} one shared client
      replay {"kind": "replay", "cache": path, "inner": {...}?}
    """
    kind = spec.get("kind")
    if kind == "mock":
        script_path = spec["script"]
        if not Path(script_path).exists():
            raise ValueError(f"mock backend script not found: {script_path}")
        entries = load_script(script_path)

        def make_mock() -> Backend:
            return MockBackend(list(entries), max_in_flight=spec.get("max_in_flight"))

        return make_mock
    if kind == "http":
        config = BackendConfig(
            base_url=spec["base_url"],
            model_name=spec["model"],
            api_key_env_var_name=spec.get("api_key_env", ""),
            max_in_flight=int(spec.get("max_in_flight", 8)),
            retry_limit=int(spec.get("retry_limit", 3)),
            timeout_seconds=float(spec.get("timeout_seconds", 120.0)),
        )
        shared = HttpBackend(config)
        return lambda: shared
    if kind == "replay":
        inner_spec = spec.get("inner")
        inner_factory = backend_factory(inner_spec) if inner_spec else None
        shared_cache = ReplayCachingBackend(
            spec["cache"], inner=inner_factory() if inner_factory else None
        )
        return lambda: shared_cache
    raise ValueError(f"unknown backend kind {kind!r}")


def _parse_budget(obj: dict[str, Any]) -> BudgetSpec:
    merged = {**DEFAULT_BUDGET, **{k: int(v) for k, v in obj.items() if v is not None}}
    return BudgetSpec(h_r=merged["h_r"], h_s=merged["h_s"], turns_t=merged["turns_t"])


def _parse_params(obj: dict[str, Any], budget: BudgetSpec) -> GenerationParams:
    merged = {**DEFAULT_PARAMS, **{k: v for k, v in obj.items() if v is not None}}
    return GenerationParams(
        temperature=float(merged["temperature"]),
        top_p=float(merged["top_p"]),
        max_tokens=int(merged.get("max_tokens", budget.h_r)),
        seed=merged.get("seed"),
    )


def _write_json(path: Path, obj: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def _write_csv(path: Path, header: list[str], rows: list[list[Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# decode


def _scaffold_record(
    decoder: str,
    problem: ProblemInstance,
    final_output: str,
    detail: dict[str, Any],
    total_tokens: int,
    task_seed: int,
) -> dict[str, Any]:
    terminated, answer = detect_termination(final_output)
    record = {
        "schema_version": 1,
        "kind": "scaffold",
        "decoder": decoder,
        "problem_id": problem.id,
        "final_output": final_output,
        "terminated": terminated,
        "extracted_answer": answer,
        "total_completion_tokens": total_tokens,
        "metadata": {"task_seed": task_seed},
    }
    if problem.answer is not None:
        record["metadata"]["answer"] = problem.answer
    record.update(detail)
    return record


def _pick_rsa_representative(pool: list[str]) -> str:
    answers = [detect_termination(member)[1] for member in pool]
    normalized = [normalize_answer(a) for a in answers if a is not None]
    if not normalized:
        return pool[0]
    counts: dict[str, int] = {}
    for a in normalized:
        counts[a] = counts.get(a, 0) + 1
    best = max(counts.values())
    winners = {a for a, c in counts.items() if c == best}
    for member, answer in zip(pool, answers):
        if answer is not None and normalize_answer(answer) in winners:
            return member
    return pool[0]


def _run_one_decode(
    manifest: dict[str, Any],
    problem: ProblemInstance,
    sample_index: int,
    prompts: PromptSet,
    budget: BudgetSpec,
    params: GenerationParams,
    backend: Backend,
) -> dict[str, Any]:
    decoder = manifest["decoder"]
    options = manifest.get("decoder_options", {}) or {}
    task_seed = _derived_seed(manifest["seed"], problem.id, sample_index)
    params = params.with_seed(task_seed)

    if decoder in ("rsa", "dsm"):
        counting = _CountingBackend(backend)
        if decoder == "rsa":
            rsa_opts = options.get("rsa", {}) or {}
            cfg = scaffolds.RsaConfig(
                pool_m=int(rsa_opts.get("pool_m", 8)),
                sample_k=int(rsa_opts.get("sample_k", 2)),
                rounds=int(rsa_opts.get("rounds", 10)),
                inner=rsa_opts.get("inner", "plain"),
                rc_budget=budget if rsa_opts.get("inner") == "rc" else None,
            )
            pool, transcript = scaffolds.run_rsa(
                problem, cfg, prompts, params, counting, rng_seed=task_seed
            )
            final = _pick_rsa_representative(pool)
            detail = {"pool": pool, "transcript": transcript}
        else:
            dsm_opts = options.get("dsm", {}) or {}
            cfg = scaffolds.DsmConfig(
                n_gen=int(dsm_opts.get("n_gen", 8)),
                n_verify=int(dsm_opts.get("n_verify", 4)),
                rounds=int(dsm_opts.get("rounds", 6)),
                inner=dsm_opts.get("inner", "plain"),
                rc_budget=budget if dsm_opts.get("inner") == "rc" else None,
            )
            final, best_score, transcript = scaffolds.run_dsm(
                problem, cfg, prompts, params, counting, rng_seed=task_seed
            )
            detail = {"best_score": best_score, "transcript": transcript}
        return _scaffold_record(
            decoder, problem, final, detail, counting.total_tokens, task_seed
        )

    if decoder == "rc":
        traj = run_summary_loop(
            problem, prompts, budget, params, backend,
            stop_on_stable_answer=options.get("stop_on_stable_answer"),
        )
    elif decoder in ("self_refine", "self_verify"):
        traj = baselines.run_iterative_baseline(
            baselines.BaselineKind(decoder), problem, prompts, budget, params, backend
        )
    elif decoder == "budget_force":
        traj = baselines.run_budget_force(
            problem, prompts, budget, params, backend,
            force_phrase=options.get("force_phrase", baselines.DEFAULT_FORCE_PHRASE),
        )
    elif decoder == "delethink":
        traj = baselines.run_delethink(
            problem, prompts, budget, params, backend, h_chunk=options.get("h_chunk")
        )
    else:
        raise ValueError(f"unknown decoder {decoder!r}")

    metadata = {**traj.metadata, "sample_index": sample_index, "task_seed": task_seed}
    if problem.answer is not None:
        metadata["answer"] = problem.answer
    traj = replace(traj, metadata=metadata)
    return evaluation.trajectory_to_dict(traj)


def _output_valid(path: Path) -> bool:
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
        if obj.get("kind") == "scaffold":
            return bool(obj.get("problem_id")) and "final_output" in obj
        evaluation.trajectory_from_dict(obj)
        return True
    except Exception:  # noqa: BLE001 - any parse failure means re-run
        return False


def run_decode(manifest: dict[str, Any], out_dir: Union[str, Path], concurrency: int = 1) -> dict[str, Any]:
    """Run the configured decoder over the dataset; write one trajectory file
    per (problem, sample) plus the manifest."""
    decoder = manifest.get("decoder", "rc")
    if decoder not in DECODER_KINDS:
        raise ValueError(f"decoder must be one of {DECODER_KINDS}, got {decoder!r}")
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "decoder": decoder,
        "dataset": manifest["dataset"],
        "budget": manifest.get("budget", {}) or {},
        "params": manifest.get("params", {}) or {},
        "samples": int(manifest.get("samples", DEFAULT_SAMPLES)),
        "seed": int(manifest.get("seed", 0)),
        "backend": manifest["backend"],
        "templates_dir": manifest.get("templates_dir"),
        "summary_detail": manifest.get("summary_detail", DEFAULT_SUMMARY_DETAIL),
        "decoder_options": manifest.get("decoder_options", {}) or {},
    }
    if manifest["samples"] < 1:
        raise ValueError("samples must be >= 1")

    problems = load_problems(manifest["dataset"])
    budget = _parse_budget(manifest["budget"])
    params = _parse_params(manifest["params"], budget)
    prompts = load_prompt_set(manifest["templates_dir"], manifest["summary_detail"])
    factory = backend_factory(manifest["backend"])

    out = Path(out_dir)
    traj_dir = out / "trajectories"
    traj_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out / "manifest.json", {**manifest, "template_hashes": prompts.template_hashes()})

    tasks = [
        (problem, sample)
        for problem in problems
        for sample in range(manifest["samples"])
    ]
    written = 0
    skipped = 0
    failures: list[dict[str, Any]] = []
    lock = threading.Lock()

    def run_task(task: tuple[ProblemInstance, int]) -> None:
        nonlocal written, skipped
        problem, sample = task
        path = traj_dir / trajectory_filename(problem.id, sample)
        if path.exists() and _output_valid(path):
            with lock:
                skipped += 1
            return
        try:
            record = _run_one_decode(
                manifest, problem, sample, prompts, budget, params, factory()
            )
        except BatonError as exc:
            with lock:
                failures.append({"problem_id": problem.id, "sample": sample, "error": str(exc)})
            return
        _write_json(path, record)
        with lock:
            written += 1

    if concurrency <= 1:
        for task in tasks:
            run_task(task)
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            list(pool.map(run_task, tasks))

    return {
        "run_dir": str(out),
        "decoder": decoder,
        "problems": len(problems),
        "samples": manifest["samples"],
        "written": written,
        "skipped": skipped,
        "failures": failures,
    }


# ---------------------------------------------------------------------------
# rollouts


def run_rollouts(request: dict[str, Any], out_dir: Union[str, Path], concurrency: int = 1) -> dict[str, Any]:
    """Generate a training batch, update the replay buffer, export JSONL."""
    del concurrency  # problems run sequentially; determinism first
    out = Path(out_dir)
    problems = load_problems(request["dataset"])
    budget_obj = {**(request.get("budget", {}) or {})}
    budget_obj.setdefault("turns_t", int(request.get("t_train", DEFAULT_ROLLOUTS["t_train"])))
    budget = _parse_budget(budget_obj)
    params = _parse_params(request.get("params", {}) or {}, budget)
    seed = int(request.get("seed", 0))
    cfg = rollouts.RolloutConfig(
        t_train=int(request.get("t_train", DEFAULT_ROLLOUTS["t_train"])),
        n_summ=int(request.get("n_summ", DEFAULT_ROLLOUTS["n_summ"])),
        k_group=int(request.get("k_group", DEFAULT_ROLLOUTS["k_group"])),
        budget=budget,
        mode=request.get("mode", rollouts.MODE_RC),
        use_replay=bool(request.get("use_replay", False)),
        epoch=int(request.get("epoch", 1)),
        baseline_kind=request.get("baseline_kind", "self_refine"),
    )
    prompts = load_prompt_set(
        request.get("templates_dir"), request.get("summary_detail", DEFAULT_SUMMARY_DETAIL)
    )
    factory = backend_factory(request["backend"])

    buffer_path = Path(request.get("buffer_path") or out / "buffer.jsonl")
    capacity = int(request.get("buffer_capacity") or cfg.t_train)
    if buffer_path.exists():
        buffer = ReplayBuffer.load(buffer_path, capacity_per_problem=capacity, rng_seed=seed)
    else:
        buffer = ReplayBuffer(capacity_per_problem=capacity, rng_seed=seed)

    batch_path = out / "batches" / f"batch-epoch{cfg.epoch:03d}.jsonl"
    if batch_path.exists():
        try:
            existing = rollouts.load_batch_jsonl(batch_path)
            return {
                "batch_path": str(batch_path),
                "buffer_path": str(buffer_path),
                "rows": len(existing),
                "groups": len({r.group_id for r in existing}),
                "skipped_existing": True,
            }
        except Exception:  # noqa: BLE001 - corrupt batch gets regenerated
            pass

    combined = rollouts.BatchResult(rows=[])
    for problem in problems:
        part = rollouts.generate_batch(
            [problem], cfg, buffer, prompts, params, factory(), rng_seed=seed
        )
        combined.rows.extend(part.rows)
        combined.skipped.extend(part.skipped)
        combined.zero_variance_groups.extend(part.zero_variance_groups)
        combined.fresh_start_problems.extend(part.fresh_start_problems)

    rollouts.write_batch_jsonl(combined.rows, batch_path)
    _write_json(
        batch_path.with_suffix(".manifest.json"),
        rollouts.batch_manifest(cfg, prompts, combined, seed),
    )
    buffer.save(buffer_path)

    return {
        "batch_path": str(batch_path),
        "buffer_path": str(buffer_path),
        "rows": len(combined.rows),
        "groups": len(combined.group_ids),
        "zero_variance_groups": len(combined.zero_variance_groups),
        "skipped_problems": combined.skipped,
        "fresh_start_problems": combined.fresh_start_problems,
        "max_lineage_depth": buffer.max_lineage_depth(),
        "skipped_existing": False,
    }


# ---------------------------------------------------------------------------
# eval


def load_run(run_dir: Union[str, Path]) -> tuple[dict[str, Any], evaluation.EvalRun, list[dict[str, Any]]]:
    """Read a run directory into (manifest, turn-based EvalRun, scaffold records)."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise MalformedRunDir(f"missing manifest.json in {run_dir}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedRunDir(f"unparseable manifest.json: {exc}") from exc
    traj_dir = run_dir / "trajectories"
    if not traj_dir.is_dir():
        raise MalformedRunDir(f"missing trajectories/ in {run_dir}")

    samples: dict[str, list[tuple[int, Trajectory]]] = {}
    answers: dict[str, str] = {}
    scaffold_records: list[dict[str, Any]] = []
    for path in sorted(traj_dir.glob("*.json")):
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedRunDir(f"unparseable trajectory {path.name}: {exc}") from exc
        if obj.get("kind") == "scaffold":
            scaffold_records.append(obj)
            continue
        traj = evaluation.trajectory_from_dict(obj)
        sample_index = int(traj.metadata.get("sample_index", len(samples.get(traj.problem_id, []))))
        samples.setdefault(traj.problem_id, []).append((sample_index, traj))
        answer = traj.metadata.get("answer")
        if answer is not None:
            answers[traj.problem_id] = answer

    ordered = {
        pid: [traj for _, traj in sorted(pairs, key=lambda p: p[0])]
        for pid, pairs in samples.items()
    }
    run = evaluation.EvalRun(
        dataset_id=str(manifest.get("dataset", "")),
        samples=ordered,
        answers=answers,
        metadata={"decoder": manifest.get("decoder", "")},
    )
    return manifest, run, scaffold_records


def _ks_for(n: int) -> list[int]:
    ks = []
    k = 1
    while k < n:
        ks.append(k)
        k *= 2
    ks.append(n)
    return ks


def run_eval(run_dir: Union[str, Path]) -> dict[str, Any]:
    """Emit metric CSVs for a finished run; returns a summary."""
    run_dir = Path(run_dir)
    manifest, run, scaffold_records = load_run(run_dir)
    metrics_dir = run_dir / "metrics"
    summary: dict[str, Any] = {"run_dir": str(run_dir), "decoder": manifest.get("decoder", "")}

    if scaffold_records and run.samples:
        raise MalformedRunDir("run mixes scaffold records and turn trajectories")

    if scaffold_records:
        rows = []
        correct = 0
        scored = 0
        for rec in scaffold_records:
            answer = rec.get("metadata", {}).get("answer")
            extracted = rec.get("extracted_answer")
            ok = ""
            if answer is not None:
                scored += 1
                hit = extracted is not None and answers_match(extracted, answer)
                correct += int(hit)
                ok = int(hit)
            rows.append([rec["problem_id"], extracted or "", ok, rec.get("total_completion_tokens", 0)])
        _write_csv(
            metrics_dir / "scaffold_accuracy.csv",
            ["problem_id", "extracted_answer", "correct", "total_completion_tokens"],
            rows,
        )
        summary["scaffold_accuracy"] = correct / scored if scored else None
        summary["records"] = len(scaffold_records)
        return summary

    if not run.samples:
        raise MalformedRunDir(f"no trajectory files in {run_dir}")

    curve = evaluation.accuracy_vs_budget(run)
    _write_csv(
        metrics_dir / "accuracy_vs_budget.csv",
        ["turn", "budget_tokens", "mean_cumulative_tokens", "accuracy"],
        [[p["turn"], p["budget_tokens"], p["mean_cumulative_tokens"], p["accuracy"]] for p in curve],
    )

    n = run.n_samples
    labeled = [pid for pid in sorted(run.samples) if pid in run.answers]
    pass_rows = []
    maj_rows = []
    for point in curve:
        turn = point["turn"]
        per_problem = []
        maj_correct = 0
        for pid in labeled:
            answer = run.answers[pid]
            as_of = [evaluation.answer_as_of_turn(t, turn) for t in run.samples[pid]]
            c = sum(1 for a in as_of if a is not None and evaluation.answers_match(a, answer))
            per_problem.append((n, c))
            votes = [a for a in as_of if a is not None]
            if votes:
                winner = evaluation.maj_at_k(votes, k=len(votes))
                maj_correct += int(evaluation.answers_match(winner, answer))
        if per_problem:
            for k in _ks_for(n):
                pass_rows.append(
                    [turn, point["budget_tokens"], k, evaluation.pass_at_k(per_problem, k)]
                )
            maj_rows.append(
                [turn, point["budget_tokens"], n, maj_correct / len(labeled)]
            )
    if pass_rows:
        _write_csv(metrics_dir / "pass_at_k.csv", ["turn", "budget_tokens", "k", "pass_at_k"], pass_rows)
    if maj_rows:
        _write_csv(metrics_dir / "maj_at_k.csv", ["turn", "budget_tokens", "k", "maj_accuracy"], maj_rows)

    stats = evaluation.termination_stats(run)
    term_rows = [["overall", "", stats.overall_rate]]
    term_rows += [["cdf", length, fraction] for length, fraction in stats.by_length]
    _write_csv(metrics_dir / "termination.csv", ["kind", "reasoning_tokens", "value"], term_rows)

    summary.update(
        {
            "problems": len(run.samples),
            "n_samples": n,
            "final_accuracy": curve[-1]["accuracy"] if curve else None,
            "termination_rate": stats.overall_rate,
            "metrics_dir": str(metrics_dir),
        }
    )
    return summary


# ---------------------------------------------------------------------------
# cost sweeps and annotation


def run_cost_sweep(
    c: int, h_r: int, h_s: int, t_max: int, t_min: int = 1, out_path: Optional[Union[str, Path]] = None
) -> list[dict[str, Any]]:
    rows = list(costs.sweep(c, h_r, h_s, t_max, t_min=t_min))
    if out_path is not None:
        _write_csv(
            Path(out_path),
            ["t", "budget_tokens", "ic_standard", "ic_relay", "speedup", "memory_ratio"],
            [
                [r["t"], r["budget_tokens"], r["ic_standard"], r["ic_relay"], r["speedup"], r["memory_ratio"]]
                for r in rows
            ],
        )
    return rows


def run_annotate_strategies(request: dict[str, Any]) -> dict[str, Any]:
    """Label every (summary, next-trace) pair in a run via the annotator backend."""
    run_dir = Path(request["run_dir"])
    _, run, scaffold_records = load_run(run_dir)
    if scaffold_records:
        raise MalformedRunDir("strategy annotation needs turn trajectories, not scaffold records")
    prompts = load_prompt_set(request.get("templates_dir"))
    factory = backend_factory(request["backend"])
    params = GenerationParams(
        temperature=float(request.get("temperature", 0.0)),
        top_p=1.0,
        max_tokens=int(request.get("max_tokens", 512)),
    )
    annotations = evaluation.annotate_strategies(run, factory(), prompts, params)
    _write_csv(
        run_dir / "metrics" / "strategies.csv",
        ["problem_id", "sample_index", "turn_index", "label", "parsed"],
        [[a.problem_id, a.sample_index, a.turn_index, a.label, int(a.parsed)] for a in annotations],
    )
    return {
        "pairs": len(annotations),
        "distribution": evaluation.strategy_distribution(annotations),
        "unparsed": sum(1 for a in annotations if not a.parsed),
    }


def run_annotate_difficulty(request: dict[str, Any], out_path: Union[str, Path]) -> dict[str, Any]:
    """Offline curation recipe: per-problem mean reward over k plain bounded
    attempts, written as a weight file. Resampling weights stay user-supplied."""
    problems = load_problems(request["dataset"])
    budget = _parse_budget(request.get("budget", {}) or {})
    params = _parse_params(request.get("params", {}) or {}, budget)
    k = int(request.get("k", 64))
    seed = int(request.get("seed", 0))
    prompts = load_prompt_set(request.get("templates_dir"))
    factory = backend_factory(request["backend"])

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    scored = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for problem in problems:
            if not problem.answer:
                continue
            backend = factory()
            rewards = []
            for j in range(k):
                traj = run_summary_loop(
                    problem, prompts, replace(budget, turns_t=1),
                    params.with_seed(_derived_seed(seed, problem.id, j)), backend,
                )
                rewards.append(score(traj.final_output, problem.answer).reward)
            scored += 1
            fh.write(
                json.dumps(
                    {
                        "id": problem.id,
                        "score": sum(rewards) / len(rewards),
                        "correct": int(sum(rewards)),
                        "samples": k,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return {"out_path": str(out_path), "problems_scored": scored, "k": k}

"""Acceptance suite: one test per release criterion, each printing a PASS
line (run with -s to see them). Everything runs against the scripted mock
backend; no network, no GPU.
"""

import itertools
import json
import math
import random

import pytest

from baton.backends import MockBackend
from baton.baselines import DEFAULT_FORCE_PHRASE, run_budget_force, run_delethink
from baton.cli import main as cli_main
from baton.core import BudgetSpec, GenerationParams, ProblemInstance, effective_budget
from baton.costs import ic_standard, speedup
from baton.decoder import run_summary_loop
from baton.evaluation import pass_at_k
from baton.grpo import compute_advantages
from baton.prompts import load_prompt_set
from baton.replay import ReplayBuffer
from baton.rollouts import RolloutConfig, generate_batch
from baton.scaffolds import DsmConfig, RsaConfig, run_dsm, run_rsa

from conftest import token_text, tree_digest, write_dataset, write_script

PROMPTS = load_prompt_set()


def ok(name):
    print(f"ACCEPTANCE PASS: {name}")


def test_relay_conditioning_contract():
    """Turn-t reasoning sees the previous summary verbatim and nothing longer
    than a 32-token shred of the previous trace; call order is R,S,R,S,R."""
    problem = ProblemInstance(id="p", prompt="What is 3+4?", answer="7")
    budget = BudgetSpec(h_r=128, h_s=16, turns_t=3)
    params = GenerationParams(max_tokens=128)
    traces = [token_text(64, f"r{t}tok") + f" \\boxed{{{t}}}" for t in (1, 2, 3)]
    mock = MockBackend([
        (problem.prompt, traces[0]),
        ("r1tok0", "SUMMARY-ONE distinct note"),
        ("SUMMARY-ONE", traces[1]),
        ("r2tok0", "SUMMARY-TWO other note"),
        ("SUMMARY-TWO", traces[2]),
    ])
    run_summary_loop(problem, PROMPTS, budget, params, mock)

    kinds = [
        "R" if req.messages[0].content == PROMPTS.reasoning_system else "S"
        for req in mock.request_log
    ]
    assert kinds == ["R", "S", "R", "S", "R"]

    reasoning_reqs = [r for r, kind in zip(mock.request_log, kinds) if kind == "R"]
    summaries = ["", "SUMMARY-ONE distinct note", "SUMMARY-TWO other note"]
    for t in (2, 3):
        text = reasoning_reqs[t - 1].flat_text()
        assert summaries[t - 1] in text
        prev_tokens = traces[t - 2].split()
        for start in range(len(prev_tokens) - 31):
            window = " ".join(prev_tokens[start : start + 32])
            assert window not in text
    ok("relay conditioning contract (R,S,R,S,R; summary verbatim; no trace carryover)")


def test_budget_accounting():
    """Effective budget is exactly turns*h_r and per-turn spend stays within
    h_r + h_s at the headline configuration."""
    budget = BudgetSpec(h_r=16384, h_s=2048, turns_t=12)
    assert effective_budget(budget) == 196608

    problem = ProblemInstance(id="p", prompt="What is 3+4?", answer="7")
    script = []
    prev = problem.prompt
    for t in range(1, 13):
        script.append((prev, token_text(300, f"t{t}_") + f" \\boxed{{{t}}}"))
        if t < 12:
            prev = f"RECAP-{t} keeps going"
            script.append((f"t{t}_0", prev))
    traj = run_summary_loop(
        problem, PROMPTS, budget, GenerationParams(max_tokens=16384), MockBackend(script)
    )
    assert len(traj.turns) == 12
    previous = 0
    for cum in traj.cumulative_tokens:
        assert cum - previous <= budget.h_r + budget.h_s
        previous = cum
    ok("budget accounting (effective budget 196608; per-turn spend <= h_r + h_s)")


def test_grpo_against_brute_force():
    """Standardized advantages match direct mean/std arithmetic on 1000
    random groups to 1e-9; all-equal groups zero out."""
    rng = random.Random(20240817)
    for _ in range(1000):
        k = rng.randint(2, 16)
        if rng.random() < 0.15:
            rewards = [rng.choice([0.0, 1.0])] * k
        else:
            rewards = [rng.choice([0.0, 1.0]) for _ in range(k)]
        got = compute_advantages(rewards)
        mean = math.fsum(rewards) / k
        std = math.sqrt(math.fsum((r - mean) ** 2 for r in rewards) / k)
        if std < 1e-8:
            assert got == [0.0] * k
        else:
            want = [(r - mean) / std for r in rewards]
            assert all(abs(a - b) <= 1e-9 for a, b in zip(got, want))
    ok("group advantages match brute-force standardization (1000 groups, 1e-9)")


def test_training_pipeline_shape():
    """t_train=3, n_summ=2, k_group=8 yields exactly 16 rows per problem with
    intact group structure and bounded rollout lengths."""
    problem = ProblemInstance(id="p", prompt="What is 3+4?", answer="7")
    budget = BudgetSpec(h_r=64, h_s=16, turns_t=3)
    cfg = RolloutConfig(t_train=3, n_summ=2, k_group=8, budget=budget)
    summaries = ["SUM-ONE a", "SUM-TWO b", "SUM-THREE c"]
    entries = []
    for t in range(1, 4):
        marker = problem.prompt if t == 1 else summaries[t - 2]
        entries.append((marker, f"turn {t} reasoning \\boxed{{{t}}}"))
        entries.append((f"turn {t} reasoning", summaries[t - 1]))
    for summary in summaries:
        for j in range(8):
            answer = "7" if j % 3 else "3"
            entries.append((summary, f"rollout \\boxed{{{answer}}}"))
    result = generate_batch(
        [problem], cfg, None, PROMPTS, GenerationParams(max_tokens=64),
        MockBackend(entries), rng_seed=0,
    )
    assert len(result.rows) == 16
    groups = {}
    for row in result.rows:
        groups.setdefault(row.group_id, []).append(row)
    assert len(groups) == 2
    for rows in groups.values():
        assert len(rows) == 8
        assert len({(r.problem_id, r.conditioning_text) for r in rows}) == 1
        assert abs(sum(r.advantage for r in rows)) <= 1e-9
        assert all(r.rollout_tokens <= budget.h_r for r in rows)
    ok("training pipeline shape (2 groups x 8 rows, advantages centered, tokens bounded)")


def test_replay_semantics():
    """Epoch-2 rows extend lineage beyond t_train; a capacity-1 buffer keeps
    only the newest summary."""
    problem = ProblemInstance(id="p", prompt="What is 3+4?", answer="7")
    budget = BudgetSpec(h_r=64, h_s=16, turns_t=3)
    buffer = ReplayBuffer(capacity_per_problem=1, rng_seed=0)

    def epoch_entries(epoch, seed_marker):
        names = [f"E{epoch}-SUM-{i} text" for i in (1, 2, 3)]
        entries = []
        for t in range(1, 4):
            marker = seed_marker if t == 1 else names[t - 2]
            entries.append((marker, f"turn {t} reasoning \\boxed{{{t}}}"))
            entries.append((f"turn {t} reasoning", names[t - 1]))
        for name in names:
            entries += [(name, "r \\boxed{7}"), (name, "r \\boxed{3}")]
        return names, entries

    cfg1 = RolloutConfig(t_train=3, n_summ=2, k_group=2, budget=budget,
                         use_replay=True, epoch=1)
    names1, entries1 = epoch_entries(1, problem.prompt)
    generate_batch([problem], cfg1, buffer, PROMPTS, GenerationParams(max_tokens=64),
                   MockBackend(entries1), rng_seed=0)
    kept = buffer.entries(problem.id)
    assert len(kept) == 1 and kept[0].summary == names1[-1] and kept[0].lineage_depth == 3

    cfg2 = RolloutConfig(t_train=3, n_summ=2, k_group=2, budget=budget,
                         use_replay=True, epoch=2)
    _, entries2 = epoch_entries(2, names1[-1])
    result2 = generate_batch([problem], cfg2, buffer, PROMPTS, GenerationParams(max_tokens=64),
                             MockBackend(entries2), rng_seed=0)
    assert result2.rows and all(row.lineage_depth > 3 for row in result2.rows)
    kept2 = buffer.entries(problem.id)
    assert len(kept2) == 1 and kept2[0].lineage_depth == 6
    ok("replay semantics (epoch-2 lineage > t_train; capacity-1 keeps newest)")


def test_cost_model_formulas():
    """Closed forms agree with loop summation on 1000 random cases with exact
    integers; speedup identities hold."""
    rng = random.Random(6021023)
    for _ in range(1000):
        c = rng.randrange(0, 10_000)
        n = rng.randrange(1, 100_001)
        assert ic_standard(c, n) == sum(range(c + 1, c + n + 1))
    for h_r in (1, 64, 16384):
        for t in (1, 2, 7, 12):
            assert speedup(0, h_r, 0, t) == float(t)
    assert abs(speedup(1000, 16384, 2048, 12) - 197608 / 19432) <= 1e-9
    ok("cost-model formulas (loop oracle exact; speedup identities)")


def test_pass_at_k_oracle():
    """Unbiased estimator equals exhaustive subset enumeration for all
    n <= 10 cases to 1e-12; pass@n reduces to any-correct."""
    for n in range(1, 11):
        for c in range(0, n + 1):
            flags = [True] * c + [False] * (n - c)
            for k in range(1, n + 1):
                subsets = list(itertools.combinations(range(n), k))
                brute = sum(any(flags[i] for i in s) for s in subsets) / len(subsets)
                assert abs(pass_at_k([(n, c)], k) - brute) <= 1e-12
            assert pass_at_k([(n, c)], n) == (1.0 if c > 0 else 0.0)
    ok("pass@k estimator equals exhaustive enumeration (n <= 10, 1e-12)")


def test_baseline_fidelity():
    """Delethink carries forward exactly the trailing h_chunk mock tokens
    (h_chunk defaults to h_r/2); budget forcing inserts exactly T phrases on
    an always-terminating script."""
    problem = ProblemInstance(id="p", prompt="What is 3+4?", answer="7")
    budget = BudgetSpec(h_r=8, h_s=2, turns_t=2)
    params = GenerationParams(max_tokens=8)
    trace = token_text(8, "dl")  # dl0..dl7, hits h_r so finish=length
    mock = MockBackend([(problem.prompt, trace), ("", "done \\boxed{7}")])
    traj = run_delethink(problem, PROMPTS, budget, params, mock)
    assert traj.metadata["h_chunk"] == 4
    request_tokens = mock.request_log[1].flat_text().split()
    tail = trace.split()[-4:]
    idx = request_tokens.index(tail[0])
    assert request_tokens[idx : idx + 4] == tail
    assert all(tok not in request_tokens for tok in trace.split()[:-4])

    force_budget = BudgetSpec(h_r=64, h_s=2, turns_t=3)
    force_mock = MockBackend([("", f"round {i} \\boxed{{{i}}}") for i in (1, 2, 3)])
    force_traj = run_budget_force(problem, PROMPTS, force_budget,
                                  GenerationParams(max_tokens=64), force_mock)
    assert force_traj.metadata["transcript"].count(DEFAULT_FORCE_PHRASE) == 3
    ok("baseline fidelity (delethink exact suffix; budget force T phrases)")


def test_scaffold_invariants():
    """Pool-aggregation keeps exactly M solutions with k candidate blocks per
    aggregation prompt; the agent returns the argmax score and exits early on
    a perfect verification average."""
    problem = ProblemInstance(id="p", prompt="What is 3+4?", answer="7")
    params = GenerationParams(max_tokens=64)
    cfg = RsaConfig(pool_m=4, sample_k=2, rounds=3)
    replies = [f"init sol {i}" for i in range(4)]
    replies += [f"agg r{r} m{i}" for r in (1, 2) for i in range(4)]
    mock = MockBackend([("", reply) for reply in replies])
    pool, transcript = run_rsa(problem, cfg, PROMPTS, params, mock, rng_seed=0)
    assert len(pool) == 4
    assert all(len(event["pool"]) == 4 for event in transcript)
    for req in mock.request_log[4:]:
        assert req.flat_text().count("[CANDIDATE") == 2

    dsm_cfg = DsmConfig(n_gen=2, n_verify=2, rounds=6)
    dsm_mock = MockBackend([("", r) for r in (
        "cand A", "cand B",
        "SCORE: 1.0", "SCORE: 1.0",   # A perfect -> early exit
        "SCORE: 0.5", "SCORE: 0.0",
    )])
    best, best_score, dsm_transcript = run_dsm(problem, dsm_cfg, PROMPTS, params, dsm_mock)
    assert (best, best_score) == ("cand A", 1.0)
    assert dsm_transcript[-1]["kind"] == "early_exit"
    assert len(dsm_mock.request_log) == 6
    ok("scaffold invariants (pool size M, k blocks per prompt; agent argmax + early exit)")


def test_end_to_end_determinism(tmp_path, capsys):
    """Two decode runs from the same manifest and mock script produce
    byte-identical output trees."""
    dataset = write_dataset(
        tmp_path / "data.jsonl",
        [
            {"id": "p1", "prompt": "What is 3+4?", "answer": "7"},
            {"id": "p2", "prompt": "What is 2*3?", "answer": "6"},
        ],
    )
    entries = []
    for pid, prompt, answer in (("p1", "What is 3+4?", 7), ("p2", "What is 2*3?", 6)):
        entries += [
            (prompt, token_text(24, f"{pid}r1") + f" \\boxed{{{answer}}}"),
            (f"{pid}r10", f"{pid.upper()}-SUM note"),
            (f"{pid.upper()}-SUM", token_text(24, f"{pid}r2") + f" \\boxed{{{answer}}}"),
        ]
    script = write_script(tmp_path / "script.jsonl", entries)
    backend = tmp_path / "backend.json"
    backend.write_text(json.dumps({"kind": "mock", "script": script}))

    def decode(out_name):
        code = cli_main([
            "decode", "--dataset", dataset, "--out", str(tmp_path / out_name),
            "--backend-config", str(backend), "--decoder", "rc",
            "--turns", "2", "--h-r", "64", "--h-s", "16",
            "--samples", "2", "--seed", "123", "--concurrency", "2",
        ])
        assert code == 0
        capsys.readouterr()

    decode("run_a")
    decode("run_b")
    files_a = sorted(p.relative_to(tmp_path / "run_a") for p in (tmp_path / "run_a").rglob("*.json"))
    files_b = sorted(p.relative_to(tmp_path / "run_b") for p in (tmp_path / "run_b").rglob("*.json"))
    assert files_a == files_b and len(files_a) >= 5
    assert tree_digest(tmp_path / "run_a") == tree_digest(tmp_path / "run_b")
    with capsys.disabled():
        ok("end-to-end determinism (byte-identical run trees)")

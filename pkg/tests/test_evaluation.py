import itertools
import random

import pytest

from baton.backends import MockBackend, mock_script
from baton.core import BudgetSpec, GenerationParams, Trajectory, TurnRecord
from baton.errors import KExceedsN
from baton.evaluation import (
    EvalRun,
    StrategyAnnotation,
    accuracy_vs_budget,
    annotate_strategies,
    answer_as_of_turn,
    load_trajectory,
    maj_at_k,
    parse_strategy_label,
    pass_at_k,
    save_trajectory,
    strategy_distribution,
    termination_stats,
    trajectory_from_dict,
    trajectory_to_dict,
)

BUDGET = BudgetSpec(h_r=64, h_s=16, turns_t=4)


def make_traj(answers, problem_id="p", lengths=None, summaries=True):
    """Trajectory whose turn t reasoning is boxed with answers[t-1] (None = no box)."""
    turns = []
    cumulative = []
    total = 0
    lengths = lengths or [10] * len(answers)
    for i, answer in enumerate(answers, start=1):
        reasoning = f"turn {i} " + (f"\\boxed{{{answer}}}" if answer is not None else "no box")
        is_last = i == len(answers)
        summary_tokens = 0 if (is_last or not summaries) else 3
        total += lengths[i - 1] + summary_tokens
        turns.append(
            TurnRecord(
                turn_index=i,
                reasoning=reasoning,
                summary="" if (is_last or not summaries) else f"sum {i}",
                reasoning_tokens=lengths[i - 1],
                summary_tokens=summary_tokens,
                terminated=answer is not None,
                extracted_answer=str(answer) if answer is not None else None,
            )
        )
        cumulative.append(total)
    return Trajectory(problem_id, "rc", BUDGET, tuple(turns), tuple(cumulative))


class TestTrajectoryStore:
    def test_json_roundtrip(self, tmp_path):
        traj = make_traj(["6", None, "7"])
        path = tmp_path / "t.json"
        save_trajectory(traj, path)
        assert load_trajectory(path) == traj

    def test_dict_roundtrip_preserves_metadata(self):
        traj = make_traj(["7"])
        obj = trajectory_to_dict(traj)
        assert obj["schema_version"] == 1
        assert trajectory_from_dict(obj) == traj


class TestAnswerAsOf:
    def test_latest_boxed_answer_wins(self):
        traj = make_traj(["6", None, "7"])
        assert answer_as_of_turn(traj, 1) == "6"
        assert answer_as_of_turn(traj, 2) == "6"
        assert answer_as_of_turn(traj, 3) == "7"

    def test_short_trajectory_keeps_final_answer(self):
        traj = make_traj(["6"])
        assert answer_as_of_turn(traj, 4) == "6"

    def test_no_answer(self):
        assert answer_as_of_turn(make_traj([None, None]), 2) is None


class TestAccuracyVsBudget:
    def test_constant_curve_when_correct_from_turn_one(self):
        run = EvalRun("d", {"p": [make_traj(["7"] * 3)]}, answers={"p": "7"})
        curve = accuracy_vs_budget(run)
        assert [point["accuracy"] for point in curve] == [1.0, 1.0, 1.0]
        assert [point["budget_tokens"] for point in curve] == [64, 128, 192]

    def test_step_curve_correct_at_turn_three(self):
        run = EvalRun("d", {"p": [make_traj([None, "3", "7", "7"])]}, answers={"p": "7"})
        curve = accuracy_vs_budget(run)
        assert [point["accuracy"] for point in curve] == [0.0, 0.0, 1.0, 1.0]

    def test_counting_oracle_two_problems_two_samples(self):
        # 3 of 4 trajectories correct at the final turn
        samples = {
            "a": [make_traj(["7", "7"], "a"), make_traj(["3", "7"], "a")],
            "b": [make_traj(["9", "9"], "b"), make_traj(["3", "3"], "b")],
        }
        run = EvalRun("d", samples, answers={"a": "7", "b": "9"})
        curve = accuracy_vs_budget(run)
        assert curve[-1]["accuracy"] == pytest.approx(0.75)

    def test_mean_cumulative_tokens_reported(self):
        run = EvalRun("d", {"p": [make_traj(["7", "7"], lengths=[10, 20])]}, answers={"p": "7"})
        curve = accuracy_vs_budget(run)
        assert curve[0]["mean_cumulative_tokens"] == 13.0  # 10 + 3 summary
        assert curve[1]["mean_cumulative_tokens"] == 33.0


def pass_at_k_bruteforce(n, c, k):
    """Exhaustive oracle: enumerate all k-subsets of n attempts with c correct."""
    flags = [True] * c + [False] * (n - c)
    hits = 0
    total = 0
    for subset in itertools.combinations(range(n), k):
        total += 1
        hits += any(flags[i] for i in subset)
    return hits / total


class TestPassAtK:
    def test_zero_correct(self):
        assert pass_at_k([(4, 0)], 2) == 0.0

    def test_all_correct(self):
        assert pass_at_k([(4, 4)], 2) == 1.0

    def test_two_of_four(self):
        assert pass_at_k([(4, 2)], 2) == pytest.approx(5 / 6)
        assert pass_at_k_bruteforce(4, 2, 2) == pytest.approx(5 / 6)

    def test_matches_bruteforce_exhaustively(self):
        for n in range(1, 11):
            for c in range(0, n + 1):
                for k in range(1, n + 1):
                    assert pass_at_k([(n, c)], k) == pytest.approx(
                        pass_at_k_bruteforce(n, c, k), abs=1e-12
                    )

    def test_pass_at_n_is_any_correct(self):
        for n in range(1, 11):
            for c in range(0, n + 1):
                assert pass_at_k([(n, c)], n) == (1.0 if c > 0 else 0.0)

    def test_monotone_in_k(self):
        rng = random.Random(5)
        for _ in range(50):
            n = rng.randint(2, 12)
            c = rng.randint(0, n)
            values = [pass_at_k([(n, c)], k) for k in range(1, n + 1)]
            assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_mean_over_problems(self):
        assert pass_at_k([(4, 4), (4, 0)], 2) == pytest.approx(0.5)

    def test_k_exceeds_n(self):
        with pytest.raises(KExceedsN):
            pass_at_k([(4, 2)], 5)


class TestMajAtK:
    def test_simple_majority(self):
        assert maj_at_k(["7", "7", "3"], k=3) == "7"

    def test_tie_goes_to_earliest(self):
        assert maj_at_k(["a", "b"], k=2) == "a"
        assert maj_at_k(["b", "a"], k=2) == "b"

    def test_counting_oracle_sixteen_samples(self):
        answers = ["9"] * 9 + [str(i) for i in range(7)]
        rng = random.Random(11)
        rng.shuffle(answers)
        assert maj_at_k(answers, k=16) == "9"

    def test_normalization_applied(self):
        assert maj_at_k(["1/2", "0.5 ", " 1/2"], k=3) == "1/2"

    def test_prefix_selection(self):
        assert maj_at_k(["1", "1", "2", "2", "2"], k=2) == "1"

    def test_seeded_subsample_reproducible(self):
        answers = ["a", "b", "a", "b", "a"]
        picks = {maj_at_k(answers, k=3, rng_seed=4, subsample=True) for _ in range(5)}
        assert len(picks) == 1

    def test_k_exceeds_length(self):
        with pytest.raises(KExceedsN):
            maj_at_k(["1"], k=2)


class TestTerminationStats:
    def test_all_terminated(self):
        run = EvalRun("d", {"p": [make_traj(["7", "7"])]}, answers={})
        stats = termination_stats(run)
        assert stats.overall_rate == 1.0
        assert stats.total_turns == 2

    def test_none_terminated(self):
        run = EvalRun("d", {"p": [make_traj([None, None])]}, answers={})
        assert termination_stats(run).overall_rate == 0.0

    def test_cdf_over_lengths(self):
        traj = make_traj(["7", None, "7"], lengths=[5, 10, 20])
        run = EvalRun("d", {"p": [traj]}, answers={})
        stats = termination_stats(run)
        assert stats.overall_rate == pytest.approx(2 / 3)
        assert stats.by_length == ((5, 1 / 3), (10, 1 / 3), (20, 2 / 3))

    def test_empty_run(self):
        stats = termination_stats(EvalRun("d", {}, answers={}))
        assert stats.overall_rate == 0.0 and stats.total_turns == 0


class TestStrategyAnnotation:
    def test_parse_label(self):
        assert parse_strategy_label("text\nCATEGORY: verification") == ("verification", True)
        assert parse_strategy_label("CATEGORY: exploration\nCATEGORY: refinement") == (
            "refinement", True)
        assert parse_strategy_label("maybe?") == ("none", False)

    def test_scripted_annotator_distribution(self, prompts):
        traj = make_traj(["6", "7", "7"])
        run = EvalRun("d", {"p": [traj]}, answers={})
        mock = MockBackend([
            ("sum 1", "CATEGORY: verification"),
            ("sum 2", "CATEGORY: exploration"),
        ])
        annotations = annotate_strategies(run, mock, prompts, GenerationParams(max_tokens=32))
        assert [a.label for a in annotations] == ["verification", "exploration"]
        assert all(a.parsed for a in annotations)
        dist = strategy_distribution(annotations)
        assert dist["verification"] == 0.5 and dist["exploration"] == 0.5
        assert dist["none"] == 0.0

    def test_malformed_verdict_flagged_none(self, prompts):
        traj = make_traj(["6", "7"])
        run = EvalRun("d", {"p": [traj]}, answers={})
        mock = mock_script([("", "maybe?")])
        annotations = annotate_strategies(run, mock, prompts, GenerationParams(max_tokens=32))
        assert annotations[0].label == "none"
        assert not annotations[0].parsed

    def test_backend_error_skips_pair(self, prompts):
        traj = make_traj(["6", "7", "7"])
        run = EvalRun("d", {"p": [traj]}, answers={})
        mock = mock_script([("sum 1", "CATEGORY: refinement")])  # second call exhausts
        annotations = annotate_strategies(run, mock, prompts, GenerationParams(max_tokens=32))
        assert [a.label for a in annotations] == ["refinement", "none"]
        assert [a.parsed for a in annotations] == [True, False]


class TestEvalRun:
    def test_unequal_sample_counts_rejected(self):
        with pytest.raises(ValueError):
            EvalRun("d", {"a": [make_traj(["7"], "a")], "b": []})

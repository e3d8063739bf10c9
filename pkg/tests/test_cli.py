import json

import pytest

from baton.cli import main

from conftest import token_text, tree_digest, write_dataset, write_script


@pytest.fixture
def run_cli(capsys):
    def invoke(*argv):
        code = main(list(argv))
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return invoke


def setup_decode_inputs(tmp_path):
    dataset = write_dataset(
        tmp_path / "data.jsonl",
        [
            {"id": "p1", "prompt": "What is 3+4?", "answer": "7"},
            {"id": "p:2/odd", "prompt": "What is 2*3?", "answer": "6"},
        ],
    )
    entries = []
    for pid, prompt, answer in (("p1", "What is 3+4?", 7), ("p2", "What is 2*3?", 6)):
        entries += [
            (prompt, token_text(20, f"{pid}r1") + f" \\boxed{{{answer}}}"),
            (f"{pid}r10", f"{pid.upper()}-SUM note"),
            (f"{pid.upper()}-SUM", token_text(20, f"{pid}r2") + f" \\boxed{{{answer}}}"),
        ]
    script = write_script(tmp_path / "script.jsonl", entries)
    backend = tmp_path / "backend.json"
    backend.write_text(json.dumps({"kind": "mock", "script": script}))
    return dataset, str(backend)


class TestDecodeCommand:
    def decode(self, run_cli, tmp_path, out_name, extra=()):
        dataset, backend = setup_decode_inputs(tmp_path)
        return run_cli(
            "decode",
            "--dataset", dataset,
            "--out", str(tmp_path / out_name),
            "--backend-config", backend,
            "--decoder", "rc",
            "--turns", "2",
            "--h-r", "64",
            "--h-s", "16",
            "--samples", "1",
            "--seed", "0",
            *extra,
        )

    def test_decode_writes_run(self, run_cli, tmp_path):
        code, out, err = self.decode(run_cli, tmp_path, "run1")
        assert code == 0, err
        report = json.loads(out)
        assert report["written"] == 2
        assert (tmp_path / "run1" / "manifest.json").exists()

    def test_identical_runs_byte_identical_trees(self, run_cli, tmp_path):
        code_a, _, _ = self.decode(run_cli, tmp_path, "run_a")
        code_b, _, _ = self.decode(run_cli, tmp_path, "run_b")
        assert code_a == code_b == 0
        assert tree_digest(tmp_path / "run_a") == tree_digest(tmp_path / "run_b")

    def test_rerun_resumes(self, run_cli, tmp_path):
        self.decode(run_cli, tmp_path, "run1")
        code, out, _ = self.decode(run_cli, tmp_path, "run1")
        assert code == 0
        assert json.loads(out)["skipped"] == 2

    def test_single_turn_plain_decode(self, run_cli, tmp_path):
        dataset, backend = setup_decode_inputs(tmp_path)
        code, out, err = run_cli(
            "decode", "--dataset", dataset, "--out", str(tmp_path / "t1"),
            "--backend-config", backend, "--turns", "1", "--h-r", "64", "--h-s", "16",
            "--samples", "1",
        )
        assert code == 0, err
        files = list((tmp_path / "t1" / "trajectories").glob("*.json"))
        record = json.loads(files[0].read_text())
        assert len(record["turns"]) == 1
        assert record["turns"][0]["summary"] == ""

    def test_missing_backend_config_fails(self, run_cli, tmp_path):
        dataset, _ = setup_decode_inputs(tmp_path)
        with pytest.raises(SystemExit):
            main(["decode", "--dataset", dataset, "--out", str(tmp_path / "x")])


class TestConfigPrecedence:
    def test_flags_beat_config_file(self, run_cli, tmp_path):
        dataset, backend = setup_decode_inputs(tmp_path)
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "dataset": dataset,
            "out": str(tmp_path / "from_config"),
            "backend_config": backend,
            "turns": 2,
            "h_r": 64,
            "h_s": 16,
            "samples": 1,
        }))
        code, out, err = run_cli(
            "decode", "--config", str(config), "--out", str(tmp_path / "from_flag")
        )
        assert code == 0, err
        assert (tmp_path / "from_flag").exists()
        assert not (tmp_path / "from_config").exists()

    def test_config_supplies_defaults(self, run_cli, tmp_path):
        dataset, backend = setup_decode_inputs(tmp_path)
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "dataset": dataset,
            "out": str(tmp_path / "from_config"),
            "backend_config": backend,
            "turns": 2, "h_r": 64, "h_s": 16, "samples": 1,
        }))
        code, _, err = run_cli("decode", "--config", str(config))
        assert code == 0, err
        assert (tmp_path / "from_config" / "manifest.json").exists()


class TestEvalAndCost:
    def test_eval_command(self, run_cli, tmp_path):
        dataset, backend = setup_decode_inputs(tmp_path)
        run_cli(
            "decode", "--dataset", dataset, "--out", str(tmp_path / "run1"),
            "--backend-config", backend, "--turns", "2", "--h-r", "64", "--h-s", "16",
            "--samples", "1",
        )
        code, out, err = run_cli("eval", str(tmp_path / "run1"))
        assert code == 0, err
        summary = json.loads(out)["summary"]
        assert summary["final_accuracy"] == 1.0

    def test_eval_twice_identical_csvs(self, run_cli, tmp_path):
        dataset, backend = setup_decode_inputs(tmp_path)
        run_cli(
            "decode", "--dataset", dataset, "--out", str(tmp_path / "run1"),
            "--backend-config", backend, "--turns", "2", "--h-r", "64", "--h-s", "16",
            "--samples", "1",
        )
        run_cli("eval", str(tmp_path / "run1"))
        digest_one = tree_digest(tmp_path / "run1" / "metrics")
        run_cli("eval", str(tmp_path / "run1"))
        assert tree_digest(tmp_path / "run1" / "metrics") == digest_one

    def test_eval_malformed_run_dir(self, run_cli, tmp_path):
        code, _, err = run_cli("eval", str(tmp_path / "missing"))
        assert code == 1
        assert json.loads(err)["error"] == "MalformedRunDir"

    def test_eval_single_turn_run_one_row_curve(self, run_cli, tmp_path):
        dataset, backend = setup_decode_inputs(tmp_path)
        run_cli(
            "decode", "--dataset", dataset, "--out", str(tmp_path / "t1"),
            "--backend-config", backend, "--turns", "1", "--h-r", "64", "--h-s", "16",
            "--samples", "1",
        )
        code, _, err = run_cli("eval", str(tmp_path / "t1"))
        assert code == 0, err
        curve = (tmp_path / "t1" / "metrics" / "accuracy_vs_budget.csv").read_text().splitlines()
        assert len(curve) == 2  # header + one budget point

    def test_cost_sweep_range(self, run_cli, tmp_path):
        out_csv = tmp_path / "sweep.csv"
        code, out, err = run_cli(
            "cost", "--c", "1000", "--h-r", "16384", "--h-s", "2048",
            "--t", "1..12", "--out", str(out_csv),
        )
        assert code == 0, err
        rows = json.loads(out)["rows"]
        assert len(rows) == 12
        assert rows[-1]["speedup"] == pytest.approx(197608 / 19432, abs=1e-6)
        assert len(out_csv.read_text().splitlines()) == 13

    def test_score_command(self, run_cli):
        code, out, _ = run_cli("score", "ans \\boxed{\\sqrt{3} - 1}", "\\sqrt{3}-1")
        assert code == 0
        assert json.loads(out)["reward"] == 1.0


class TestRolloutsCommand:
    def test_rollouts_two_epochs(self, run_cli, tmp_path):
        dataset = write_dataset(
            tmp_path / "train.jsonl", [{"id": "p1", "prompt": "What is 3+4?", "answer": "7"}]
        )
        entries1 = [
            ("What is 3+4?", "turn 1 reasoning \\boxed{6}"),
            ("turn 1 reasoning", "E1-SUM-A alpha"),
            ("E1-SUM-A alpha", "turn 2 reasoning \\boxed{7}"),
            ("turn 2 reasoning", "E1-SUM-B beta"),
            ("E1-SUM-A", "r \\boxed{7}"), ("E1-SUM-A", "r \\boxed{3}"),
            ("E1-SUM-B", "r \\boxed{7}"), ("E1-SUM-B", "r \\boxed{3}"),
        ]
        script1 = write_script(tmp_path / "s1.jsonl", entries1)
        backend1 = tmp_path / "b1.json"
        backend1.write_text(json.dumps({"kind": "mock", "script": script1}))
        out_dir = str(tmp_path / "roll")
        code, out, err = run_cli(
            "rollouts", "--dataset", dataset, "--out", out_dir,
            "--backend-config", str(backend1),
            "--t-train", "2", "--n-summ", "2", "--k", "2",
            "--h-r", "64", "--h-s", "16", "--use-replay", "--epoch", "1",
            "--buffer-capacity", "1", "--seed", "0",
        )
        assert code == 0, err
        assert json.loads(out)["rows"] == 4

        entries2 = [
            ("E1-SUM-B beta", "turn 1 reasoning \\boxed{6}"),
            ("turn 1 reasoning", "E2-SUM-A alpha"),
            ("E2-SUM-A alpha", "turn 2 reasoning \\boxed{7}"),
            ("turn 2 reasoning", "E2-SUM-B beta"),
            ("E2-SUM-A", "r \\boxed{7}"), ("E2-SUM-A", "r \\boxed{3}"),
            ("E2-SUM-B", "r \\boxed{7}"), ("E2-SUM-B", "r \\boxed{3}"),
        ]
        script2 = write_script(tmp_path / "s2.jsonl", entries2)
        backend2 = tmp_path / "b2.json"
        backend2.write_text(json.dumps({"kind": "mock", "script": script2}))
        code, out, err = run_cli(
            "rollouts", "--dataset", dataset, "--out", out_dir,
            "--backend-config", str(backend2),
            "--t-train", "2", "--n-summ", "2", "--k", "2",
            "--h-r", "64", "--h-s", "16", "--use-replay", "--epoch", "2",
            "--buffer-capacity", "1", "--seed", "0",
        )
        assert code == 0, err
        report = json.loads(out)
        assert report["max_lineage_depth"] == 4
        batch2 = tmp_path / "roll" / "batches" / "batch-epoch002.jsonl"
        rows = [json.loads(line) for line in batch2.read_text().splitlines()]
        assert all(row["lineage_depth"] > 2 for row in rows)

import hashlib
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from chatcoder.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def runner():
    return CliRunner()


def replay_args(extra):
    return [
        "--provider", "replay",
        "--cassette", str(FIXTURES / "cassette.jsonl"),
    ] + extra


class TestEval:
    def test_auto_refine_replay_writes_report(self, runner, tmp_path):
        out = tmp_path / "out"
        result = runner.invoke(
            main,
            ["eval", "--dataset", str(FIXTURES / "fixture_tasks.jsonl"),
             "--mode", "auto-refine", "--n", "1", "--k", "1",
             "--out", str(out)] + replay_args([]),
        )
        assert result.exit_code == 0, result.output
        assert (out / "report.json").exists()
        report = json.loads((out / "report.json").read_text())
        assert report["labor_fraction"] == 0.0

    def test_replay_reports_bit_reproducible(self, runner, tmp_path):
        digests = []
        for name in ("a", "b"):
            out = tmp_path / name
            result = runner.invoke(
                main,
                ["eval", "--dataset", str(FIXTURES / "fixture_tasks.jsonl"),
                 "--mode", "chatcoder",
                 "--reviewer", str(FIXTURES / "reviewer_chatcoder.json"),
                 "--n", "1", "--k", "1", "--out", str(out)] + replay_args([]),
            )
            assert result.exit_code == 0, result.output
            digests.append(hashlib.sha256((out / "report.json").read_bytes()).hexdigest())
        assert digests[0] == digests[1]

    def test_k_greater_than_n_usage_error(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["eval", "--dataset", str(FIXTURES / "fixture_tasks.jsonl"),
             "--k", "10", "--n", "5", "--out", str(tmp_path / "o")] + replay_args([]),
        )
        assert result.exit_code == 2

    def test_chatcoder_without_reviewer_usage_error(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["eval", "--dataset", str(FIXTURES / "fixture_tasks.jsonl"),
             "--mode", "chatcoder", "--out", str(tmp_path / "o")] + replay_args([]),
        )
        assert result.exit_code == 2

    def test_missing_cassette_runtime_error(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["eval", "--dataset", str(FIXTURES / "fixture_tasks.jsonl"),
             "--provider", "replay", "--cassette", str(tmp_path / "nope.jsonl"),
             "--out", str(tmp_path / "o")],
        )
        assert result.exit_code == 1
        assert result.output.startswith("error:") or "error:" in result.output


class TestRefine:
    def test_free_qa_skips_paraphrase_round(self, runner):
        result = runner.invoke(
            main,
            ["refine", "--dataset", str(FIXTURES / "fixture_tasks.jsonl"),
             "--task-id", "fixture/add", "--mode", "free-qa",
             "--non-interactive"] + replay_args([]),
        )
        assert result.exit_code == 0, result.output
        assert "Round 1" not in result.output
        assert "Round 2: questions" in result.output
        assert "candidate verdict: pass" in result.output

    def test_chatcoder_non_interactive(self, runner):
        result = runner.invoke(
            main,
            ["refine", "--dataset", str(FIXTURES / "fixture_tasks.jsonl"),
             "--task-id", "fixture/negate", "--mode", "chatcoder",
             "--non-interactive"] + replay_args([]),
        )
        assert result.exit_code == 0, result.output
        assert "== Final refined requirement ==" in result.output
        assert "labor: 0/" in result.output

    def test_unknown_task_usage_error(self, runner):
        result = runner.invoke(
            main,
            ["refine", "--dataset", str(FIXTURES / "fixture_tasks.jsonl"),
             "--task-id", "fixture/none", "--non-interactive"] + replay_args([]),
        )
        assert result.exit_code == 2


class TestStatsAndReport:
    def run_eval(self, runner, tmp_path, mode, extra=()):
        out = tmp_path / f"out-{mode}"
        args = ["eval", "--dataset", str(FIXTURES / "fixture_tasks.jsonl"),
                "--mode", mode, "--out", str(out)] + list(extra) + replay_args([])
        result = runner.invoke(main, args)
        assert result.exit_code == 0, result.output
        return out

    def test_stats_recomputes_from_sessions(self, runner, tmp_path):
        out = self.run_eval(
            runner, tmp_path, "chatcoder",
            ["--reviewer", str(FIXTURES / "reviewer_chatcoder.json")],
        )
        result = runner.invoke(main, ["stats", "--sessions", str(out / "sessions")])
        assert result.exit_code == 0, result.output
        assert "aggregate labor fraction:" in result.output

    def test_report_merges_two_runs(self, runner, tmp_path):
        out_a = self.run_eval(runner, tmp_path, "auto-refine")
        out_b = self.run_eval(runner, tmp_path, "baseline")
        result = runner.invoke(
            main, ["report", str(out_a / "report.json"), str(out_b / "report.json")]
        )
        assert result.exit_code == 0, result.output
        assert "| auto-refine |" in result.output
        assert "| baseline |" in result.output

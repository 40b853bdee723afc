import json

import pytest

from chatcoder.data import (
    TaskSpec,
    load_humaneval,
    load_mbpp_sanitized,
    select_few_shot,
    task_from_dict,
    task_to_dict,
)
from chatcoder.errors import InsufficientPool, MalformedRecord, MissingField


def humaneval_record(i: int) -> dict:
    return {
        "task_id": f"HumanEval/{i}",
        "prompt": f'def f{i}(x):\n    """Do thing {i}."""\n',
        "entry_point": f"f{i}",
        "test": f"def check(candidate):\n    assert candidate({i}) is not None\n",
        "canonical_solution": "    return x\n",
    }


def mbpp_record(i: int) -> dict:
    return {
        "task_id": i,
        "prompt": f"Write a function to do thing {i}.",
        "code": f"def g{i}(x):\n    return x",
        "test_list": [f"assert g{i}(1) == 1", f"assert g{i}(2) == 2", f"assert g{i}(3) == 3"],
        "test_imports": [],
    }


class TestHumaneval:
    def test_loads_all_records_as_evaluation(self, tmp_path):
        path = tmp_path / "he.jsonl"
        path.write_text("\n".join(json.dumps(humaneval_record(i)) for i in range(5)))
        tasks = load_humaneval(path)
        assert len(tasks) == 5
        assert all(t.split == "evaluation" for t in tasks)
        assert tasks[0].requirement_text == humaneval_record(0)["prompt"]

    def test_missing_field_reports_line(self, tmp_path):
        record = humaneval_record(0)
        del record["entry_point"]
        path = tmp_path / "he.jsonl"
        path.write_text(json.dumps(humaneval_record(1)) + "\n" + json.dumps(record) + "\n")
        with pytest.raises(MissingField, match=":2"):
            load_humaneval(path)

    def test_empty_file_ok(self, tmp_path):
        path = tmp_path / "he.jsonl"
        path.write_text("")
        assert load_humaneval(path) == []

    def test_malformed_json_line(self, tmp_path):
        path = tmp_path / "he.jsonl"
        path.write_text("{not json}\n")
        with pytest.raises(MalformedRecord):
            load_humaneval(path)

    def test_round_trip_preserves_text(self, tmp_path):
        path = tmp_path / "he.jsonl"
        path.write_text(json.dumps(humaneval_record(3)) + "\n")
        task = load_humaneval(path)[0]
        assert task_from_dict(task_to_dict(task)) == task


class TestMbpp:
    def test_splits_and_signature(self, tmp_path):
        records = [mbpp_record(i) for i in (1, 2, 3, 11, 12)]
        path = tmp_path / "mbpp.json"
        path.write_text(json.dumps(records))
        tasks = load_mbpp_sanitized(path)
        pool = [t for t in tasks if t.split == "fewshot-pool"]
        evaluation = [t for t in tasks if t.split == "evaluation"]
        assert {t.task_id for t in pool} == {"1", "2", "3"}
        assert {t.task_id for t in evaluation} == {"11", "12"}
        assert "def g11(x):" in evaluation[0].requirement_text
        assert evaluation[0].entry_point == "g11"

    def test_three_asserts_in_test_code(self, tmp_path):
        path = tmp_path / "mbpp.json"
        path.write_text(json.dumps([mbpp_record(11)]))
        task = load_mbpp_sanitized(path)[0]
        assert task.test_code.count("assert") == 3

    def test_no_function_definition_falls_back(self, tmp_path, caplog):
        record = mbpp_record(11)
        record["code"] = "x = 1"
        path = tmp_path / "mbpp.json"
        path.write_text(json.dumps([record]))
        with caplog.at_level("WARNING"):
            tasks = load_mbpp_sanitized(path)
        assert tasks[0].requirement_text == record["prompt"]
        assert any("no function definition" in r.message for r in caplog.records)


class TestFewShot:
    def make_pool(self, n):
        return [
            TaskSpec(
                task_id=str(i),
                dataset="mbpp",
                requirement_text=f"req {i}",
                entry_point=f"g{i}",
                test_code="assert True",
                canonical_solution=f"def g{i}(): pass",
                split="fewshot-pool",
            )
            for i in range(1, n + 1)
        ]

    def target(self):
        return TaskSpec(
            task_id="99",
            dataset="mbpp",
            requirement_text="target",
            entry_point="t",
            test_code="assert True",
        )

    def test_k_zero(self):
        assert select_few_shot(self.make_pool(3), 0, self.target()) == []

    def test_three_shots_ascending(self):
        shots = select_few_shot(self.make_pool(5), 3, self.target())
        assert [s[0] for s in shots] == ["req 1", "req 2", "req 3"]

    def test_insufficient_pool(self):
        with pytest.raises(InsufficientPool):
            select_few_shot(self.make_pool(2), 3, self.target())

    def test_target_excluded(self):
        pool = self.make_pool(3)
        target = pool[0]
        shots = select_few_shot(pool, 2, target)
        assert all(s[0] != target.requirement_text for s in shots)

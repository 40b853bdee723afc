#!/usr/bin/env python3
"""Regenerate the bundled replay fixtures.

Records one cassette covering all five evaluation modes over the 12-task
fixture set (driven by the deterministic stub model), replays every mode,
and freezes the resulting report.json digests. Outputs land in
tests/fixtures/; run from the repository root after any change that alters
prompts, parsing or report layout.
"""

import hashlib
import json
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from chatcoder import evaluation as ev  # noqa: E402
from chatcoder.data import load_humaneval  # noqa: E402
from chatcoder.gateway import ChatGateway, ModelConfig  # noqa: E402
from chatcoder.testing import FakeModel  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"

# (task_id suffix, entry point, solution or None for a wrong stub)
TASK_DEFS = [
    ("add", "add", "def add(a, b):\n    return a + b"),
    ("double", "double", "def double(x):\n    return 2 * x"),
    ("negate", "negate", "def negate(x):\n    return -x"),
    ("maximum", "maximum", "def maximum(xs):\n    return max(xs)"),
    ("reverse_text", "reverse_text", "def reverse_text(s):\n    return s[::-1]"),
    ("is_even", "is_even", "def is_even(n):\n    return n % 2 == 0"),
    ("count_vowels", "count_vowels", "def count_vowels(s):\n    return sum(c in 'aeiou' for c in s.lower())"),
    ("factorial", "factorial", "def factorial(n):\n    out = 1\n    for i in range(2, n + 1):\n        out *= i\n    return out"),
    ("clamp", "clamp", "def clamp(x, lo, hi):\n    return max(lo, min(hi, x))"),
    ("join_words", "join_words", "def join_words(ws):\n    return ' '.join(ws)"),
    ("wrong_one", "wrong_one", None),  # stub answer fails its tests
    ("prose_only", "prose_only", None),  # model replies without any code block
]

TESTS = {
    "add": "def check(candidate):\n    assert candidate(1, 2) == 3\n    assert candidate(-1, 1) == 0\n",
    "double": "def check(candidate):\n    assert candidate(3) == 6\n    assert candidate(0) == 0\n",
    "negate": "def check(candidate):\n    assert candidate(5) == -5\n",
    "maximum": "def check(candidate):\n    assert candidate([1, 9, 4]) == 9\n",
    "reverse_text": "def check(candidate):\n    assert candidate('abc') == 'cba'\n",
    "is_even": "def check(candidate):\n    assert candidate(4) is True\n    assert candidate(3) is False\n",
    "count_vowels": "def check(candidate):\n    assert candidate('Echo') == 2\n",
    "factorial": "def check(candidate):\n    assert candidate(5) == 120\n",
    "clamp": "def check(candidate):\n    assert candidate(12, 0, 10) == 10\n",
    "join_words": "def check(candidate):\n    assert candidate(['a', 'b']) == 'a b'\n",
    "wrong_one": "def check(candidate):\n    assert candidate(2) == 4\n",
    "prose_only": "def check(candidate):\n    assert candidate(1) == 1\n",
}


def write_task_file() -> Path:
    path = FIXTURES / "fixture_tasks.jsonl"
    with open(path, "w", encoding="utf-8") as handle:
        for name, entry, solution in TASK_DEFS:
            record = {
                "task_id": f"fixture/{name}",
                "prompt": f'def {entry}(*args):\n    """Solve the {name.replace("_", " ")} task."""\n',
                "entry_point": entry,
                "test": TESTS[name],
                "canonical_solution": solution or "    pass\n",
            }
            handle.write(json.dumps(record) + "\n")
    return path


def write_reviewer_files(task_ids):
    chatcoder_script = {}
    for task_id in task_ids:
        entry = {"edits": {}, "answers": []}
        if task_id.endswith("/add"):
            entry["edits"] = {
                "input_requirements": "The inputs are two integers a and b, possibly negative."
            }
            entry["answers"] = [
                {"index": 0, "action": "answer", "text": "No validation is needed."}
            ]
        if task_id.endswith("/double"):
            entry["answers"] = [{"index": 1, "action": "flag_loopback"}]
            entry["loopback_edits"] = {
                "edge_cases": "Zero input must return zero exactly."
            }
        if task_id.endswith("/maximum"):
            entry["edits"] = {"exceptions_errors": ""}  # delete the section
        chatcoder_script[task_id] = entry
    (FIXTURES / "reviewer_chatcoder.json").write_text(
        json.dumps(chatcoder_script, indent=2, sort_keys=True)
    )
    simple = {task_id: {"edits": {}, "answers": []} for task_id in task_ids}
    (FIXTURES / "reviewer_simple.json").write_text(
        json.dumps(simple, indent=2, sort_keys=True)
    )


def reviewer_for(mode: str) -> ev.ReviewerPolicy:
    if mode in (ev.AUTO_REFINE, ev.BASELINE):
        return ev.ReviewerPolicy(kind="none")
    if mode == ev.CHATCODER:
        return ev.ReviewerPolicy.from_file(FIXTURES / "reviewer_chatcoder.json")
    return ev.ReviewerPolicy.from_file(FIXTURES / "reviewer_simple.json")


MODES = (ev.CHATCODER, ev.AUTO_REFINE, ev.FREE_PARAPHRASE, ev.FREE_QA, ev.BASELINE)


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    task_file = write_task_file()
    tasks = load_humaneval(task_file)
    write_reviewer_files([t.task_id for t in tasks])

    cassette = FIXTURES / "cassette.jsonl"
    if cassette.exists():
        cassette.unlink()

    solutions = {entry: solution for _, entry, solution in TASK_DEFS if solution}
    fake = FakeModel(solutions, prose_only={"prose_only"})
    gen_cfg = ev.GenerationConfig(n=1, k_list=(1,))

    work = Path(tempfile.mkdtemp(prefix="cc-fixtures-"))
    try:
        record_cfg = ModelConfig(provider="record", cassette_path=str(cassette))
        for mode in MODES:
            gateway = ChatGateway(record_cfg, transport=fake, rate_per_s=100000)
            ev.run_experiment(tasks, mode, reviewer_for(mode), record_cfg, gen_cfg,
                              work / f"record-{mode}", gateway=gateway)

        digests = {}
        replay_cfg = ModelConfig(provider="replay", cassette_path=str(cassette))
        for mode in MODES:
            out_dir = work / f"replay-{mode}"
            report = ev.run_experiment(tasks, mode, reviewer_for(mode), replay_cfg,
                                       gen_cfg, out_dir)
            payload = (out_dir / "report.json").read_bytes()
            digests[mode] = hashlib.sha256(payload).hexdigest()
            print(f"{mode}: pass@1={report.pass_at_k_means[1]:.4f} "
                  f"labor={report.labor_fraction:.4f} digest={digests[mode][:12]}")
        (FIXTURES / "report_digests.json").write_text(
            json.dumps(digests, indent=2, sort_keys=True) + "\n"
        )
    finally:
        shutil.rmtree(work, ignore_errors=True)
    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()

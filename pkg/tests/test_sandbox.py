import subprocess
import time

import pytest

from chatcoder.data import TaskSpec
from chatcoder.errors import SandboxSetupError
from chatcoder.sandbox import (
    CRASH,
    EXTRACTION_FAILURE,
    FAIL,
    PASS,
    TIMEOUT,
    Limits,
    run_candidate,
    run_many,
)


def make_task(test_code="assert f() == 1", entry_point="f"):
    return TaskSpec(
        task_id="t",
        dataset="mbpp",
        requirement_text="req",
        entry_point=entry_point,
        test_code=test_code,
    )


class TestVerdicts:
    def test_pass(self):
        verdict = run_candidate("def f(): return 1", make_task())
        assert verdict.outcome == PASS

    def test_fail_on_wrong_answer(self):
        verdict = run_candidate("def f(): return 1", make_task("assert f() == 2"))
        assert verdict.outcome == FAIL
        assert "AssertionError" in verdict.exit_detail

    def test_fail_on_exception(self):
        verdict = run_candidate("def f(): raise ValueError('boom')", make_task("f()"))
        assert verdict.outcome == FAIL

    def test_timeout(self):
        start = time.monotonic()
        verdict = run_candidate(
            "def f():\n    while True:\n        pass",
            make_task("f()"),
            Limits(timeout_s=2.0),
        )
        elapsed = time.monotonic() - start
        assert verdict.outcome == TIMEOUT
        assert verdict.wall_time_s >= 2.0
        assert elapsed < 5.0  # enforced within about a second of the limit

    def test_crash_on_signal(self):
        code = "import os, signal\ndef f():\n    os.kill(os.getpid(), signal.SIGKILL)"
        verdict = run_candidate(code, make_task("f()"))
        assert verdict.outcome == CRASH

    def test_empty_code_short_circuits(self):
        verdict = run_candidate("   ", make_task())
        assert verdict.outcome == EXTRACTION_FAILURE

    def test_humaneval_check_suite_invoked(self):
        task = TaskSpec(
            task_id="he",
            dataset="humaneval",
            requirement_text="req",
            entry_point="inc",
            test_code="def check(candidate):\n    assert candidate(1) == 2\n",
        )
        assert run_candidate("def inc(x): return x + 1", task).outcome == PASS
        assert run_candidate("def inc(x): return x", task).outcome == FAIL

    def test_test_setup_included(self):
        task = TaskSpec(
            task_id="m",
            dataset="mbpp",
            requirement_text="req",
            entry_point="h",
            test_code="assert h(4) == 2.0",
            test_setup="import math",
        )
        assert run_candidate("def h(x): return math.sqrt(x)", task).outcome == PASS

    def test_missing_interpreter(self):
        with pytest.raises(SandboxSetupError):
            run_candidate("def f(): return 1", make_task(), interpreter="/no/such/python")


class TestIsolation:
    def test_deterministic_outcomes(self):
        task = make_task("assert f() == 3")
        outcomes = {run_candidate("def f(): return 3", task).outcome for _ in range(3)}
        assert outcomes == {PASS}

    def test_concurrent_runs_isolated(self):
        # each run writes a file with a fixed name; isolation means no clashes
        code = (
            "def f():\n"
            "    with open('scratch.txt', 'x') as fh:\n"
            "        fh.write('mine')\n"
            "    return open('scratch.txt').read()\n"
        )
        task = make_task("assert f() == 'mine'")
        verdicts = run_many([(code, task)] * 6, max_workers=6)
        assert all(v.outcome == PASS for v in verdicts)

    def test_no_orphan_processes_after_timeout(self):
        code = (
            "import subprocess, sys\n"
            "def f():\n"
            "    subprocess.Popen([sys.executable, '-c', 'import time; time.sleep(60)'])\n"
            "    import time\n"
            "    time.sleep(60)\n"
        )
        marker = "cc_orphan_marker_sleep"
        code = code.replace("time.sleep(60)'", f"time.sleep(60) # {marker}'")
        verdict = run_candidate(code, make_task("f()"), Limits(timeout_s=1.5))
        assert verdict.outcome == TIMEOUT
        out = subprocess.run(["ps", "ax"], capture_output=True, text=True).stdout
        assert marker not in out

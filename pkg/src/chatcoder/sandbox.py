"""Isolated execution of one candidate program plus its hidden test suite.

Each run gets its own process group, temporary working directory, scrubbed
environment and resource limits. Verdicts map exit behaviour to
pass/fail/timeout/crash. Network denial is best-effort (environment
scrubbing); run inside a container for hostile inputs.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .data import TaskSpec
from .errors import SandboxSetupError

SANDBOX_DIR_ENV = "CHATCODER_SANDBOX_DIR"
DEFAULT_TIMEOUT_S = 10.0
DEFAULT_MEMORY_BYTES = 512 * 1024 * 1024
DETAIL_LIMIT = 4096

PASS_SENTINEL = "__CHATCODER_TESTS_PASSED__"

PASS = "pass"
FAIL = "fail"
TIMEOUT = "timeout"
CRASH = "crash"
EXTRACTION_FAILURE = "extraction_failure"


@dataclass(frozen=True)
class Limits:
    timeout_s: float = DEFAULT_TIMEOUT_S
    memory_bytes: int = DEFAULT_MEMORY_BYTES


@dataclass(frozen=True)
class ExecutionVerdict:
    outcome: str  # pass | fail | timeout | crash | extraction_failure
    wall_time_s: float
    exit_detail: str = ""


def build_test_program(code: str, task: TaskSpec) -> str:
    """Assemble setup + candidate + tests into one runnable module."""
    parts = []
    if task.test_setup:
        parts.append(task.test_setup)
    parts.append(code)
    parts.append(task.test_code)
    if "def check(" in task.test_code:
        # HumanEval-style suite: a check(candidate) entry function
        parts.append(f"check({task.entry_point})")
    parts.append(f'print("{PASS_SENTINEL}")')
    return "\n\n".join(parts) + "\n"


def _child_setup(memory_bytes: int):
    import resource

    os.setsid()
    try:
        resource.setrlimit(resource.RLIMIT_AS, (memory_bytes, memory_bytes))
    except (ValueError, OSError):
        pass
    try:
        resource.setrlimit(resource.RLIMIT_CORE, (0, 0))
    except (ValueError, OSError):
        pass


def run_candidate(
    code: str,
    task: TaskSpec,
    limits: Limits = Limits(),
    interpreter: str | None = None,
) -> ExecutionVerdict:
    """Run one candidate against the task's tests in a fresh process."""
    if not code.strip():
        return ExecutionVerdict(EXTRACTION_FAILURE, 0.0, "empty candidate")
    interpreter = interpreter or sys.executable
    if shutil.which(interpreter) is None and not os.path.exists(interpreter):
        raise SandboxSetupError(f"interpreter not found: {interpreter}")
    temp_root = os.environ.get(SANDBOX_DIR_ENV) or None
    try:
        workdir = tempfile.mkdtemp(prefix="cc-sbx-", dir=temp_root)
    except OSError as exc:
        raise SandboxSetupError(f"cannot create sandbox directory: {exc}") from exc

    program_path = os.path.join(workdir, "candidate_test.py")
    with open(program_path, "w", encoding="utf-8") as handle:
        handle.write(build_test_program(code, task))

    env = {
        "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
        "LANG": "C.UTF-8",
        "PYTHONHASHSEED": "0",
        "PYTHONDONTWRITEBYTECODE": "1",
        "no_proxy": "*",
        "NO_PROXY": "*",
    }
    start = time.monotonic()
    proc = None
    try:
        proc = subprocess.Popen(
            [interpreter, "-I", program_path],
            cwd=workdir,
            env=env,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            preexec_fn=lambda: _child_setup(limits.memory_bytes),
            text=True,
        )
        try:
            output, _ = proc.communicate(timeout=limits.timeout_s)
            elapsed = time.monotonic() - start
        except subprocess.TimeoutExpired:
            _kill_group(proc)
            proc.wait()
            elapsed = time.monotonic() - start
            return ExecutionVerdict(TIMEOUT, elapsed, f"timed out after {limits.timeout_s}s")

        detail = (output or "")[-DETAIL_LIMIT:]
        if proc.returncode == 0 and PASS_SENTINEL in (output or ""):
            return ExecutionVerdict(PASS, elapsed, "")
        if proc.returncode < 0:
            return ExecutionVerdict(CRASH, elapsed, f"signal {-proc.returncode}: {detail}")
        return ExecutionVerdict(FAIL, elapsed, detail)
    finally:
        if proc is not None and proc.poll() is None:
            _kill_group(proc)
            proc.wait()
        shutil.rmtree(workdir, ignore_errors=True)


def _kill_group(proc: subprocess.Popen) -> None:
    import signal

    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass


def run_many(
    jobs: list[tuple[str, TaskSpec]],
    limits: Limits = Limits(),
    max_workers: int | None = None,
) -> list[ExecutionVerdict]:
    """Run candidates in a bounded worker pool, preserving job order."""
    max_workers = max_workers or os.cpu_count() or 4
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda job: run_candidate(job[0], job[1], limits), jobs))

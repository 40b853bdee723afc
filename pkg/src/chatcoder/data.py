"""Benchmark task ingestion: HumanEval JSON-lines and sanitized-MBPP JSON."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import InsufficientPool, MalformedRecord, MissingField

logger = logging.getLogger(__name__)

HUMANEVAL = "humaneval"
MBPP = "mbpp"


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    dataset: str  # humaneval | mbpp
    requirement_text: str
    entry_point: str
    test_code: str
    test_setup: str = ""
    canonical_solution: str | None = None
    split: str = "evaluation"  # evaluation | fewshot-pool

    def __post_init__(self):
        if not self.entry_point:
            raise ValueError("entry_point must be non-empty")
        if not self.test_code:
            raise ValueError("test_code must be non-empty")


def task_to_dict(task: TaskSpec) -> dict:
    return {
        "task_id": task.task_id,
        "dataset": task.dataset,
        "requirement_text": task.requirement_text,
        "entry_point": task.entry_point,
        "test_code": task.test_code,
        "test_setup": task.test_setup,
        "canonical_solution": task.canonical_solution,
        "split": task.split,
    }


def task_from_dict(doc: dict) -> TaskSpec:
    return TaskSpec(**doc)


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise MissingField(f"{where}: missing field {key!r}")
    return record[key]


def load_humaneval(path: str | Path) -> list[TaskSpec]:
    """Load a HumanEval-style JSON-lines file; every task is evaluation-split."""
    tasks: list[TaskSpec] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"{where}: {exc}") from exc
            tasks.append(
                TaskSpec(
                    task_id=str(_require(record, "task_id", where)),
                    dataset=HUMANEVAL,
                    requirement_text=_require(record, "prompt", where),
                    entry_point=_require(record, "entry_point", where),
                    test_code=_require(record, "test", where),
                    canonical_solution=record.get("canonical_solution"),
                    split="evaluation",
                )
            )
    if not tasks:
        logger.warning("no tasks loaded from %s", path)
    return tasks


_DEF_RE = re.compile(r"^def\s+\w+\s*\(.*$", re.MULTILINE)

# sanitized-MBPP few-shot prompt split: the conventional prompting task ids
_MBPP_PROMPT_SPLIT_IDS = frozenset(range(1, 11))
_MBPP_TEST_SPLIT_IDS = frozenset(range(11, 511))


def _extract_signature(code: str) -> str | None:
    match = _DEF_RE.search(code)
    return match.group(0) if match else None


def load_mbpp_sanitized(path: str | Path) -> list[TaskSpec]:
    """Load a sanitized-MBPP JSON file.

    Tasks in the dataset's designated prompt range become the few-shot pool;
    tasks in the test range are the evaluation split; anything else is
    ignored for evaluation purposes but still loaded as fewshot-pool when a
    canonical solution exists.
    """
    with open(path, encoding="utf-8") as handle:
        try:
            records = json.load(handle)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"{path}: {exc}") from exc
    if not isinstance(records, list):
        raise MalformedRecord(f"{path}: expected a top-level JSON array")

    tasks: list[TaskSpec] = []
    for idx, record in enumerate(records):
        where = f"{path}[{idx}]"
        task_id = _require(record, "task_id", where)
        prompt = _require(record, "prompt", where)
        code = _require(record, "code", where)
        test_list = _require(record, "test_list", where)
        test_imports = record.get("test_imports") or []

        signature = _extract_signature(code)
        if signature is None:
            logger.warning("%s: no function definition found, using prompt only", where)
            requirement = prompt
            entry_point = f"task_{task_id}"
        else:
            requirement = f"{prompt}\nThe target function signature is: {signature}"
            entry_point = signature.split("(")[0].removeprefix("def").strip()

        test_code = "\n".join(test_list)
        split = "fewshot-pool" if int(task_id) in _MBPP_PROMPT_SPLIT_IDS else "evaluation"
        tasks.append(
            TaskSpec(
                task_id=str(task_id),
                dataset=MBPP,
                requirement_text=requirement,
                entry_point=entry_point,
                test_code=test_code,
                test_setup="\n".join(test_imports),
                canonical_solution=code,
                split=split,
            )
        )
    return tasks


def select_few_shot(
    tasks: list[TaskSpec], k: int, target: TaskSpec
) -> list[tuple[str, str]]:
    """First k few-shot-pool tasks by ascending task_id, never the target."""
    if k == 0:
        return []
    pool = sorted(
        (
            t
            for t in tasks
            if t.split == "fewshot-pool"
            and t.canonical_solution
            and t.task_id != target.task_id
        ),
        key=lambda t: (len(t.task_id), t.task_id),  # numeric-ish stable order
    )
    if len(pool) < k:
        raise InsufficientPool(f"need {k} few-shot tasks, pool has {len(pool)}")
    return [(t.requirement_text, t.canonical_solution) for t in pool[:k]]

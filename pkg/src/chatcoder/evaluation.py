"""Experiment orchestration: refinement per task, candidate generation,
sandboxed testing, pass@k aggregation and report emission."""

from __future__ import annotations

import dataclasses
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import engine as eng
from . import prompts, sandbox
from .data import HUMANEVAL, TaskSpec, select_few_shot
from .errors import ChatCoderError, DomainError, InvalidConfig, ProviderError, ReplayMiss
from .gateway import REPLAY, ChatGateway, ModelConfig
from .prompts import AUTO_REFINE, CHATCODER, FREE_PARAPHRASE, FREE_QA, MODES
from .refinement import Angle, LaborStats, labor_stats

logger = logging.getLogger(__name__)

BASELINE = "baseline"
EVAL_MODES = MODES + (BASELINE,)

REPORT_SCHEMA = "eval_report.v1"
REPLAY_TIMESTAMP = "1970-01-01T00:00:00+00:00"


# ---------------------------------------------------------------------------
# pass@k


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimator 1 - C(n-c, k) / C(n, k), in stable product form."""
    if n < 1 or c < 0 or c > n or k < 1 or k > n:
        raise DomainError(f"pass_at_k out of range: n={n}, c={c}, k={k}")
    if n - c < k:
        return 1.0
    result = 1.0
    for i in range(n - c + 1, n + 1):
        result *= 1.0 - k / i
    return 1.0 - result


# ---------------------------------------------------------------------------
# Code extraction

_FENCE_RE = re.compile(r"```[ \t]*[\w+-]*[ \t]*\n(.*?)```", re.DOTALL)


def extract_code(reply: str, entry_point: str) -> str | None:
    """Pull the candidate program out of a model reply.

    Preference order: fenced block defining the entry point, then the first
    fenced block, then the region of raw lines starting at a bare definition
    of the entry point. None means extraction failure.
    """
    blocks = _FENCE_RE.findall(reply)
    def_marker = re.compile(rf"def\s+{re.escape(entry_point)}\s*\(")
    for block in blocks:
        if def_marker.search(block):
            return block
    if blocks:
        return blocks[0]
    lines = reply.splitlines()
    for i, line in enumerate(lines):
        if def_marker.match(line.strip()):
            return "\n".join(lines[i:])
    return None


# ---------------------------------------------------------------------------
# Reviewer policies


@dataclass(frozen=True)
class ReviewerPolicy:
    kind: str = "none"  # interactive | scripted | none
    script: dict[str, dict] | None = None

    @staticmethod
    def from_file(path: str | Path) -> "ReviewerPolicy":
        with open(path, encoding="utf-8") as handle:
            return ReviewerPolicy(kind="scripted", script=json.load(handle))

    def actions_for(self, task_id: str) -> dict:
        if self.kind != "scripted" or not self.script:
            return {}
        entry = self.script.get(task_id)
        if entry is None:
            logger.warning("scripted reviewer has no entry for task %s; zero edits", task_id)
            return {}
        return entry


@dataclass(frozen=True)
class GenerationConfig:
    n: int = 1
    k_list: tuple[int, ...] = (1,)
    shots: int = 0
    limits: sandbox.Limits = sandbox.Limits()

    def __post_init__(self):
        if self.n < 1:
            raise InvalidConfig("n must be >= 1")
        if any(k < 1 or k > self.n for k in self.k_list):
            raise InvalidConfig(f"every k in {self.k_list} must lie in [1, n={self.n}]")


def session_file_name(task_id: str) -> str:
    return task_id.replace("/", "_") + ".json"


@dataclass(frozen=True)
class TaskResult:
    task_id: str
    n: int
    c: int
    verdicts: tuple[sandbox.ExecutionVerdict, ...]
    labor: LaborStats
    session_ref: str | None


@dataclass
class EvalReport:
    mode: str
    dataset: str
    config_digest: str
    results: list[TaskResult]
    failed_tasks: list[dict]
    k_list: tuple[int, ...]
    n: int
    created_at: str

    @property
    def pass_at_k_means(self) -> dict[int, float]:
        means = {}
        for k in self.k_list:
            if self.results:
                means[k] = sum(pass_at_k(r.n, r.c, k) for r in self.results) / len(self.results)
            else:
                means[k] = 0.0
        return means

    @property
    def labor_fraction(self) -> float:
        if not self.results:
            return 0.0
        return sum(r.labor.fraction for r in self.results) / len(self.results)


# ---------------------------------------------------------------------------
# Session driving per mode


def drive_session(
    gateway: ChatGateway, task: TaskSpec, mode: str, reviewer: ReviewerPolicy
) -> eng.DialogueSession:
    """Run one session from creation to Finalized under a reviewer policy."""
    session = eng.create_session(task, mode, gateway.config)
    actions = reviewer.actions_for(task.task_id)

    if mode in (CHATCODER, FREE_PARAPHRASE, AUTO_REFINE):
        eng.run_paraphrase(session, gateway)
    if mode == CHATCODER:
        eng.submit_review(session, dict(actions.get("edits", {})))
    elif mode == FREE_PARAPHRASE:
        eng.submit_review(session, {})
        eng.finalize(session)
        return session

    eng.run_questioning(session, gateway)
    if mode != AUTO_REFINE:
        scripted = {a["index"]: a for a in actions.get("answers", [])}
        while session.state == eng.ROUND2_QUESTIONED:
            answers = {}
            for index, item in enumerate(session.spec.qa_items):
                if item.status != "open":
                    continue
                entry = scripted.pop(index, None)
                if entry is None:
                    answers[index] = (eng.ACCEPT, None)
                else:
                    answers[index] = (entry["action"], entry.get("text"))
            eng.resolve_questions(session, answers)
            if session.state == eng.ROUND1_REVIEWED:
                eng.submit_review(session, dict(actions.get("loopback_edits", {})))
                eng.run_questioning(session, gateway)
    eng.finalize(session)
    return session


def evaluate_task(
    gateway: ChatGateway,
    task: TaskSpec,
    mode: str,
    reviewer: ReviewerPolicy,
    gen_cfg: GenerationConfig,
    shot_pool: list[TaskSpec],
) -> tuple[TaskResult, eng.DialogueSession | None]:
    if mode == BASELINE:
        session = None
        final_requirement = task.requirement_text
        labor = LaborStats(0, 0)
    else:
        session = drive_session(gateway, task, mode, reviewer)
        final_requirement = session.final_requirement
        labor = labor_stats(session.spec)

    shots = select_few_shot(shot_pool, gen_cfg.shots, task) if gen_cfg.shots else []
    bundle = prompts.build_codegen_prompt(task, final_requirement, shots)
    replies = gateway.complete(bundle, n=gen_cfg.n)
    if session is not None:
        session._log("instruction", bundle.messages[-1].content, "codegen")
        for reply in replies:
            session._log("model", reply, "codegen")

    verdicts = []
    for reply in replies:
        code = extract_code(reply, task.entry_point)
        if code is None:
            verdicts.append(sandbox.ExecutionVerdict(sandbox.EXTRACTION_FAILURE, 0.0, "no code found"))
        else:
            verdicts.append(sandbox.run_candidate(code, task, gen_cfg.limits))
    c = sum(1 for v in verdicts if v.outcome == sandbox.PASS)
    result = TaskResult(
        task_id=task.task_id,
        n=gen_cfg.n,
        c=c,
        verdicts=tuple(verdicts),
        labor=labor,
        session_ref=f"sessions/{session_file_name(task.task_id)}" if session else None,
    )
    return result, session


def run_experiment(
    tasks: list[TaskSpec],
    mode: str,
    reviewer: ReviewerPolicy,
    model_cfg: ModelConfig,
    gen_cfg: GenerationConfig,
    out_dir: str | Path,
    gateway: ChatGateway | None = None,
) -> EvalReport:
    """Run one full experiment over the evaluation split and persist it."""
    if mode not in EVAL_MODES:
        raise InvalidConfig(f"unknown mode {mode!r}")
    if mode == AUTO_REFINE and reviewer.kind != "none":
        raise InvalidConfig("auto-refine requires the 'none' reviewer policy")
    if mode not in (AUTO_REFINE, BASELINE) and reviewer.kind == "none":
        raise InvalidConfig(f"mode {mode} requires a reviewer policy")
    if model_cfg.provider == REPLAY and not Path(model_cfg.cassette_path).exists():
        raise InvalidConfig(f"replay cassette not found: {model_cfg.cassette_path}")
    if model_cfg.n_samples < gen_cfg.n:
        model_cfg = dataclasses.replace(model_cfg, n_samples=gen_cfg.n)
    if gateway is None:
        gateway = ChatGateway(model_cfg)

    out_dir = Path(out_dir)
    (out_dir / "sessions").mkdir(parents=True, exist_ok=True)
    eval_tasks = sorted(
        (t for t in tasks if t.split == "evaluation"), key=lambda t: t.task_id
    )
    dataset = eval_tasks[0].dataset if eval_tasks else "unknown"

    results: list[TaskResult] = []
    failed: list[dict] = []
    for task in eval_tasks:
        try:
            result, session = evaluate_task(gateway, task, mode, reviewer, gen_cfg, tasks)
        except (ProviderError, ReplayMiss, ChatCoderError) as exc:
            logger.error("task %s failed to evaluate: %s", task.task_id, exc)
            failed.append({"task_id": task.task_id, "error": f"{type(exc).__name__}: {exc}"})
            continue
        results.append(result)
        if session is not None:
            path = out_dir / "sessions" / session_file_name(task.task_id)
            path.write_text(
                json.dumps(eng.session_to_dict(session), indent=2, sort_keys=True),
                encoding="utf-8",
            )

    created_at = (
        REPLAY_TIMESTAMP
        if model_cfg.provider == REPLAY
        else datetime.now(timezone.utc).isoformat()
    )
    report = EvalReport(
        mode=mode,
        dataset=dataset,
        config_digest=model_cfg.digest(),
        results=results,
        failed_tasks=failed,
        k_list=gen_cfg.k_list,
        n=gen_cfg.n,
        created_at=created_at,
    )
    (out_dir / "report.json").write_bytes(emit_report(report, "json").encode("utf-8"))
    (out_dir / "report.md").write_text(emit_report(report, "markdown-table"), encoding="utf-8")
    return report


# ---------------------------------------------------------------------------
# Report serialization


def report_to_dict(report: EvalReport) -> dict:
    # wall times and diagnostic tails are deliberately excluded: report.json
    # must be byte-identical across replay runs
    return {
        "schema": REPORT_SCHEMA,
        "mode": report.mode,
        "dataset": report.dataset,
        "config_digest": report.config_digest,
        "created_at": report.created_at,
        "n": report.n,
        "k_list": list(report.k_list),
        "pass_at_k": {str(k): v for k, v in report.pass_at_k_means.items()},
        "labor_fraction": report.labor_fraction,
        "failed_tasks": report.failed_tasks,
        "results": [
            {
                "task_id": r.task_id,
                "n": r.n,
                "c": r.c,
                "outcomes": [v.outcome for v in r.verdicts],
                "pass_at_k": {str(k): pass_at_k(r.n, r.c, k) for k in report.k_list},
                "labor": {
                    "total_tokens": r.labor.total_tokens,
                    "human_tokens": r.labor.human_tokens,
                    "fraction": r.labor.fraction,
                },
                "session_ref": r.session_ref,
            }
            for r in report.results
        ],
    }


def report_from_dict(doc: dict) -> EvalReport:
    if doc.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"unsupported report schema {doc.get('schema')!r}")
    results = [
        TaskResult(
            task_id=r["task_id"],
            n=r["n"],
            c=r["c"],
            verdicts=tuple(
                sandbox.ExecutionVerdict(outcome, 0.0, "") for outcome in r["outcomes"]
            ),
            labor=LaborStats(r["labor"]["total_tokens"], r["labor"]["human_tokens"]),
            session_ref=r.get("session_ref"),
        )
        for r in doc["results"]
    ]
    return EvalReport(
        mode=doc["mode"],
        dataset=doc["dataset"],
        config_digest=doc["config_digest"],
        results=results,
        failed_tasks=doc["failed_tasks"],
        k_list=tuple(doc["k_list"]),
        n=doc["n"],
        created_at=doc["created_at"],
    )


def emit_report(report: EvalReport, format: str = "json") -> str:
    if format == "json":
        return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    if format == "markdown-table":
        return reports_to_markdown([report])
    raise InvalidConfig(f"unknown report format {format!r}")


def reports_to_markdown(reports: list[EvalReport]) -> str:
    """Markdown table: one row per mode, one pass@k column per k."""
    k_values = sorted({k for report in reports for k in report.k_list})
    header = ["mode", "dataset"] + [f"pass@{k}" for k in k_values] + ["labor fraction", "tasks"]
    lines = [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join("---" for _ in header) + " |",
    ]
    for report in reports:
        means = report.pass_at_k_means
        cells = [report.mode, report.dataset]
        for k in k_values:
            cells.append(f"{means[k] * 100:.2f}%" if k in means else "-")
        cells.append(f"{report.labor_fraction:.4f}")
        cells.append(str(len(report.results)))
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"

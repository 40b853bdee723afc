"""HTTP facade over sessions and experiments for the companion UI.

Model calls run as asynchronous jobs with polling; review/answer/finalize
are synchronous state transitions. Sessions persist as one JSON document
each in a directory store with atomic rename writes.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import engine as eng
from . import evaluation as ev
from .data import TaskSpec, task_from_dict, task_to_dict
from .errors import (
    ChatCoderError,
    InvalidConfig,
    InvalidState,
    LoopbackBudgetExceeded,
    ParseFailure,
    PrefixViolation,
    UnaddressedQuestions,
    UnknownAngle,
    UnsupportedMode,
)
from .gateway import ChatGateway
from .prompts import build_codegen_prompt
from .sandbox import EXTRACTION_FAILURE, ExecutionVerdict, Limits, run_candidate

CONFLICT_ERRORS = (InvalidState, UnsupportedMode, LoopbackBudgetExceeded, UnaddressedQuestions)
UNPROCESSABLE_ERRORS = (UnknownAngle, InvalidConfig, PrefixViolation, ParseFailure)


class SessionStore:
    """One JSON document per session; writes are atomic renames."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.json"

    def save(self, session: eng.DialogueSession, extra: dict | None = None) -> None:
        doc = eng.session_to_dict(session)
        if extra:
            doc.update(extra)
        else:
            existing = self.load_doc(session.id)
            if existing and "candidates" in existing:
                doc["candidates"] = existing["candidates"]
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            json.dump(doc, handle, indent=2, sort_keys=True)
        os.replace(tmp, self.path(session.id))

    def load_doc(self, session_id: str) -> dict | None:
        path = self.path(session_id)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def load(self, session_id: str) -> eng.DialogueSession | None:
        doc = self.load_doc(session_id)
        if doc is None:
            return None
        doc.pop("candidates", None)
        return eng.session_from_dict(doc)


@dataclass
class JobHandle:
    job_id: str
    kind: str  # paraphrase | questioning | codegen | evaluate
    status: str = "queued"  # queued | running | done | failed
    result_ref: str | None = None
    error_detail: str | None = None

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "kind": self.kind,
            "status": self.status,
            "result_ref": self.result_ref,
            "error_detail": self.error_detail,
        }


class JobRunner:
    def __init__(self, max_workers: int = 4):
        self.pool = ThreadPoolExecutor(max_workers=max_workers)
        self.jobs: dict[str, JobHandle] = {}
        self._lock = threading.Lock()

    def submit(self, kind: str, work) -> JobHandle:
        handle = JobHandle(job_id=uuid.uuid4().hex, kind=kind)
        with self._lock:
            self.jobs[handle.job_id] = handle

        def run():
            handle.status = "running"
            try:
                handle.result_ref = work()
                handle.status = "done"
            except Exception as exc:  # jobs surface failures via polling
                handle.error_detail = f"{type(exc).__name__}: {exc}"
                handle.status = "failed"

        self.pool.submit(run)
        return handle

    def get(self, job_id: str) -> JobHandle | None:
        return self.jobs.get(job_id)


def _error_body(code: str, message: str, state: str | None = None) -> dict:
    return {"code": code, "message": message, "state": state}


def create_app(
    gateway: ChatGateway,
    store_dir: str | Path,
    tasks: list[TaskSpec] | None = None,
    eval_out_root: str | Path | None = None,
    sandbox_limits: Limits = Limits(),
    cors_origins: list[str] | None = None,
) -> FastAPI:
    app = FastAPI(title="chatcoder service", openapi_url="/spec")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(store_dir)
    runner = JobRunner()
    task_index: dict[str, TaskSpec] = {t.task_id: t for t in (tasks or [])}
    eval_out_root = Path(eval_out_root) if eval_out_root else Path(store_dir) / "evals"
    session_locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def lock_for(session_id: str) -> threading.Lock:
        with locks_guard:
            return session_locks.setdefault(session_id, threading.Lock())

    @app.exception_handler(ChatCoderError)
    async def chatcoder_error_handler(request: Request, exc: ChatCoderError):
        if isinstance(exc, CONFLICT_ERRORS):
            status = 409
        elif isinstance(exc, UNPROCESSABLE_ERRORS):
            status = 422
        else:
            status = 500
        state = None
        session_id = request.path_params.get("session_id")
        if session_id:
            doc = store.load_doc(session_id)
            if doc:
                state = doc.get("state")
        return JSONResponse(
            status_code=status,
            content=_error_body(type(exc).__name__, str(exc), state),
        )

    def get_session_or_none(session_id: str):
        return store.load(session_id)

    def not_found(what: str):
        return JSONResponse(status_code=404, content=_error_body("NotFound", what))

    def session_response(session: eng.DialogueSession) -> dict:
        doc = store.load_doc(session.id) or eng.session_to_dict(session)
        return doc

    @app.get("/health")
    def health():
        return {"status": "ok", "provider": gateway.config.provider}

    @app.get("/tasks")
    def list_tasks(dataset: str | None = None):
        selected = [
            task_to_dict(t)
            for t in task_index.values()
            if dataset is None or t.dataset == dataset
        ]
        return {"tasks": selected}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        mode = body.get("mode")
        if not mode:
            return JSONResponse(status_code=422, content=_error_body("MissingField", "mode required"))
        if "task" in body:
            try:
                task = task_from_dict(body["task"])
            except (TypeError, ValueError) as exc:
                return JSONResponse(status_code=422, content=_error_body("MalformedTask", str(exc)))
        elif "task_id" in body:
            task = task_index.get(body["task_id"])
            if task is None:
                return not_found(f"unknown task {body['task_id']}")
        else:
            return JSONResponse(status_code=422, content=_error_body("MissingField", "task or task_id required"))
        session = eng.create_session(task, mode, gateway.config)
        store.save(session)
        return {"session_id": session.id, "state": session.state, "mode": session.mode}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        doc = store.load_doc(session_id)
        if doc is None:
            return not_found(f"unknown session {session_id}")
        return doc

    @app.get("/sessions/{session_id}/transcript")
    def get_transcript(session_id: str):
        doc = store.load_doc(session_id)
        if doc is None:
            return not_found(f"unknown session {session_id}")
        return {"transcript": doc["transcript"]}

    def _busy_response(session_id: str):
        doc = store.load_doc(session_id)
        state = doc.get("state") if doc else None
        return JSONResponse(
            status_code=409,
            content=_error_body("InvalidState", "another operation is running", state),
        )

    def _session_job(session_id: str, kind: str, work_on_session):
        """Run an engine step on a session inside its lock, as a job."""
        lock = lock_for(session_id)

        def work():
            if not lock.acquire(blocking=False):
                raise InvalidState("another operation is running on this session")
            try:
                session = store.load(session_id)
                work_on_session(session)
                store.save(session)
                return session_id
            finally:
                lock.release()

        return runner.submit(kind, work)

    @app.post("/sessions/{session_id}/paraphrase", status_code=202)
    def post_paraphrase(session_id: str):
        if store.load_doc(session_id) is None:
            return not_found(f"unknown session {session_id}")
        if lock_for(session_id).locked():
            return _busy_response(session_id)
        handle = _session_job(
            session_id, "paraphrase", lambda s: eng.run_paraphrase(s, gateway)
        )
        return handle.to_dict()

    @app.post("/sessions/{session_id}/questions", status_code=202)
    def post_questions(session_id: str):
        if store.load_doc(session_id) is None:
            return not_found(f"unknown session {session_id}")
        if lock_for(session_id).locked():
            return _busy_response(session_id)
        handle = _session_job(
            session_id, "questioning", lambda s: eng.run_questioning(s, gateway)
        )
        return handle.to_dict()

    @app.post("/sessions/{session_id}/review")
    def post_review(session_id: str, body: dict):
        session = get_session_or_none(session_id)
        if session is None:
            return not_found(f"unknown session {session_id}")
        lock = lock_for(session_id)
        if not lock.acquire(blocking=False):
            return JSONResponse(
                status_code=409,
                content=_error_body("InvalidState", "another operation is running", session.state),
            )
        try:
            edits = body.get("edits", {})
            if not isinstance(edits, dict):
                return JSONResponse(status_code=422, content=_error_body("MalformedBody", "edits must be an object"))
            eng.submit_review(session, edits)
            store.save(session)
        finally:
            lock.release()
        return session_response(session)

    @app.post("/sessions/{session_id}/answers")
    def post_answers(session_id: str, body: dict):
        session = get_session_or_none(session_id)
        if session is None:
            return not_found(f"unknown session {session_id}")
        raw = body.get("answers")
        if not isinstance(raw, list):
            return JSONResponse(status_code=422, content=_error_body("MalformedBody", "answers must be a list"))
        answers = {}
        for entry in raw:
            try:
                answers[int(entry["index"])] = (entry["action"], entry.get("text"))
            except (KeyError, TypeError, ValueError):
                return JSONResponse(status_code=422, content=_error_body("MalformedBody", f"bad answer entry {entry!r}"))
        lock = lock_for(session_id)
        if not lock.acquire(blocking=False):
            return JSONResponse(
                status_code=409,
                content=_error_body("InvalidState", "another operation is running", session.state),
            )
        try:
            eng.resolve_questions(session, answers)
            store.save(session)
        finally:
            lock.release()
        return session_response(session)

    @app.post("/sessions/{session_id}/finalize")
    def post_finalize(session_id: str):
        session = get_session_or_none(session_id)
        if session is None:
            return not_found(f"unknown session {session_id}")
        lock = lock_for(session_id)
        if not lock.acquire(blocking=False):
            return JSONResponse(
                status_code=409,
                content=_error_body("InvalidState", "another operation is running", session.state),
            )
        try:
            final = eng.finalize(session)
            store.save(session)
        finally:
            lock.release()
        return {"final_requirement": final, "state": session.state}

    @app.post("/sessions/{session_id}/generate", status_code=202)
    def post_generate(session_id: str, body: dict | None = None):
        if store.load_doc(session_id) is None:
            return not_found(f"unknown session {session_id}")
        n = int((body or {}).get("n", 1))

        def work_on_session(session: eng.DialogueSession):
            if session.state != eng.FINALIZED:
                raise InvalidState("generation requires a finalized session")
            bundle = build_codegen_prompt(session.task, session.final_requirement, [])
            replies = gateway.complete(bundle, n=n)
            candidates = []
            for reply in replies:
                code = ev.extract_code(reply, session.task.entry_point)
                if code is None:
                    verdict = ExecutionVerdict(EXTRACTION_FAILURE, 0.0, "no code found")
                    code = ""
                else:
                    verdict = run_candidate(code, session.task, sandbox_limits)
                candidates.append(
                    {
                        "code": code,
                        "reply": reply,
                        "outcome": verdict.outcome,
                        "detail": verdict.exit_detail,
                    }
                )
            store.save(session, extra={"candidates": candidates})

        lock = lock_for(session_id)

        def work():
            if not lock.acquire(blocking=False):
                raise InvalidState("another operation is running on this session")
            try:
                session = store.load(session_id)
                work_on_session(session)
                return session_id
            finally:
                lock.release()

        return runner.submit("codegen", work).to_dict()

    @app.post("/evaluate", status_code=202)
    def post_evaluate(body: dict):
        mode = body.get("mode", "baseline")
        dataset = body.get("dataset")
        selected = [t for t in task_index.values() if dataset is None or t.dataset == dataset]
        if not selected:
            return JSONResponse(status_code=422, content=_error_body("NoTasks", "no tasks match"))
        reviewer = ev.ReviewerPolicy(
            kind="none" if mode in (ev.AUTO_REFINE, ev.BASELINE) else "scripted",
            script=body.get("reviewer_script") if mode not in (ev.AUTO_REFINE, ev.BASELINE) else None,
        )
        gen_cfg = ev.GenerationConfig(
            n=int(body.get("n", 1)),
            k_list=tuple(body.get("k_list", [1])),
            shots=int(body.get("shots", 0)),
            limits=sandbox_limits,
        )
        out_dir = eval_out_root / uuid.uuid4().hex

        def work():
            ev.run_experiment(
                selected, mode, reviewer, gateway.config, gen_cfg, out_dir, gateway=gateway
            )
            return str(out_dir / "report.json")

        return runner.submit("evaluate", work).to_dict()

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        handle = runner.get(job_id)
        if handle is None:
            return not_found(f"unknown job {job_id}")
        return handle.to_dict()

    return app

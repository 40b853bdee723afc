"""Session state machine for the two-round refinement protocol.

Sequences paraphrase, review, questioning, answer resolution, loop-back and
final assembly across the four modes, enforcing legal transitions only.
"""

from __future__ import annotations

import dataclasses
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from . import prompts
from .data import TaskSpec, task_from_dict, task_to_dict
from .errors import (
    InvalidConfig,
    InvalidState,
    LoopbackBudgetExceeded,
    ParseFailure,
    UnaddressedQuestions,
    UnknownAngle,
    UnsupportedMode,
)
from .gateway import LIVE, REPLAY, RECORD, ChatGateway, ModelConfig
from .prompts import (
    AUTO_REFINE,
    CHATCODER,
    FREE_PARAPHRASE,
    FREE_QA,
    MODES,
    PromptBundle,
)
from .refinement import (
    MACHINE,
    Angle,
    AngleSection,
    QAItem,
    RefinedSpec,
    diff_provenance,
    parse_angle_response,
    parse_question_response,
    render_spec,
    spec_from_dict,
    spec_to_dict,
    word_tokens,
)

# Session states
INITIALIZED = "Initialized"
ROUND1_PROPOSED = "Round1Proposed"
ROUND1_REVIEWED = "Round1Reviewed"
ROUND2_QUESTIONED = "Round2Questioned"
ROUND2_RESOLVED = "Round2Resolved"
FINALIZED = "Finalized"
ABORTED = "Aborted"

SESSION_SCHEMA = "session.v1"
DEFAULT_LOOPBACK_BUDGET = 1
PARSE_RETRY_LIMIT = 2

FORMAT_REMINDER = (
    "Your previous reply did not follow the requested format. "
    "Please answer again, following the reply format instructions exactly."
)

FINAL_SEPARATOR = "\n\n"


@dataclass
class TranscriptEntry:
    role: str  # instruction | model | human-edit | human-answer
    content: str
    round_tag: str  # round1 | round2 | codegen
    timestamp: float
    sampling_fingerprint: str | None = None


@dataclass
class DialogueSession:
    id: str
    task: TaskSpec
    mode: str
    state: str
    spec: RefinedSpec
    transcript: list[TranscriptEntry]
    config: ModelConfig
    template_set_id: str
    loopback_count: int = 0
    loopback_budget: int = DEFAULT_LOOPBACK_BUDGET
    final_requirement: str | None = None
    completeness_signal: bool = False

    def _log(self, role: str, content: str, round_tag: str, fp: str | None = None):
        now = time.time()
        if self.transcript:
            now = max(now, self.transcript[-1].timestamp)
        self.transcript.append(TranscriptEntry(role, content, round_tag, now, fp))


def create_session(task: TaskSpec, mode: str, config: ModelConfig) -> DialogueSession:
    if mode not in MODES:
        raise UnsupportedMode(f"unknown mode {mode!r}")
    if config.provider == REPLAY and not Path(config.cassette_path).exists():
        raise InvalidConfig(f"replay cassette not found: {config.cassette_path}")
    if config.provider == LIVE and not config.base_url:
        raise InvalidConfig("live provider requires a base_url")
    return DialogueSession(
        id=uuid.uuid4().hex,
        task=task,
        mode=mode,
        state=INITIALIZED,
        spec=RefinedSpec(),
        transcript=[],
        config=config,
        template_set_id=prompts.template_set_id(),
    )


def _call_model(
    session: DialogueSession,
    gateway: ChatGateway,
    bundle: PromptBundle,
    round_tag: str,
    parse,
):
    """One model call with up to two format-reminder re-asks on ParseFailure.

    Request and reply entries are always retained in the transcript, even
    when parsing ultimately fails.
    """
    current = bundle
    last_failure: ParseFailure | None = None
    for attempt in range(1 + PARSE_RETRY_LIMIT):
        session._log("instruction", current.messages[-1].content, round_tag)
        reply = gateway.complete(current, n=1)[0]
        session._log("model", reply, round_tag)
        try:
            return parse(reply)
        except ParseFailure as exc:
            last_failure = exc
            reminder = current.messages[-1].content + "\n\n" + FORMAT_REMINDER
            current = dataclasses.replace(
                current,
                messages=current.messages[:-1] + (prompts.Message("user", reminder),),
            )
    raise last_failure


def run_paraphrase(session: DialogueSession, gateway: ChatGateway) -> RefinedSpec:
    if session.state != INITIALIZED:
        raise InvalidState(f"run_paraphrase illegal in state {session.state}")
    if session.mode == FREE_QA:
        raise UnsupportedMode("free-qa has no paraphrase round")
    bundle = prompts.build_paraphrase_prompt(session.task, session.mode)

    if session.mode == FREE_PARAPHRASE:
        session._log("instruction", bundle.messages[-1].content, "round1")
        reply = gateway.complete(bundle, n=1)[0]
        session._log("model", reply, "round1")
        session.spec = session.spec.bump(free_text=reply)
        session.state = ROUND1_PROPOSED
        return session.spec

    found, _warnings = _call_model(session, gateway, bundle, "round1", parse_angle_response)
    sections = {
        angle: AngleSection.machine(angle, found.get(angle, ""), status="proposed")
        for angle in Angle
    }
    session.spec = session.spec.bump(sections=sections)
    session.state = ROUND1_PROPOSED
    if session.mode == AUTO_REFINE:
        # auto-advance through review with zero edits
        sections = {
            angle: dataclasses.replace(sec, status="reviewed" if sec.status == "proposed" else sec.status)
            for angle, sec in session.spec.sections.items()
        }
        session.spec = session.spec.bump(sections=sections)
        session.state = ROUND1_REVIEWED
    return session.spec


def submit_review(session: DialogueSession, edits: dict[Angle, str | None]) -> RefinedSpec:
    if session.mode == AUTO_REFINE:
        raise UnsupportedMode("auto-refine sessions take no human review")
    if session.state not in (ROUND1_PROPOSED, ROUND1_REVIEWED):
        raise InvalidState(f"submit_review illegal in state {session.state}")
    normalized: dict[Angle, str | None] = {}
    for key, value in edits.items():
        if isinstance(key, Angle):
            normalized[key] = value
        else:
            try:
                normalized[Angle(key)] = value
            except ValueError as exc:
                raise UnknownAngle(f"unknown angle {key!r}") from exc
    if session.mode == FREE_PARAPHRASE and normalized:
        raise UnknownAngle("free-paraphrase specs have no angle sections to edit")

    if session.mode == FREE_PARAPHRASE:
        session.spec = session.spec.bump()
        session.state = ROUND1_REVIEWED
        return session.spec

    sections = dict(session.spec.sections)
    for angle in Angle:
        section = sections.get(angle)
        if section is None:
            continue
        if angle in normalized:
            after_text = normalized[angle]
            if after_text is None:
                after_text = section.text
            updated = diff_provenance(section, after_text)
            sections[angle] = updated
            session._log(
                "human-edit",
                f"{angle.title}: {after_text if after_text else '<deleted>'}",
                "round1",
            )
        elif section.status == "proposed":
            sections[angle] = dataclasses.replace(section, status="reviewed")
    session.spec = session.spec.bump(sections=sections)
    session.state = ROUND1_REVIEWED
    return session.spec


def run_questioning(session: DialogueSession, gateway: ChatGateway) -> list[QAItem]:
    if session.mode == FREE_PARAPHRASE:
        raise UnsupportedMode("free-paraphrase has no questioning round")
    if session.mode == FREE_QA:
        if session.state != INITIALIZED:
            raise InvalidState(f"run_questioning illegal in state {session.state}")
    elif session.state != ROUND1_REVIEWED:
        raise InvalidState(f"run_questioning illegal in state {session.state}")

    bundle = prompts.build_questioning_prompt(session.task, session.spec, session.mode)
    items = _call_model(session, gateway, bundle, "round2", parse_question_response)

    session.completeness_signal = _completeness_signal(session.spec, items)
    if session.mode == AUTO_REFINE:
        items = [
            dataclasses.replace(
                item,
                final_answer=item.proposed_answer,
                final_answer_origin=MACHINE,
                status="answered",
            )
            for item in items
        ]
        session.spec = session.spec.bump(qa_items=session.spec.qa_items + tuple(items))
        session.state = ROUND2_RESOLVED
    else:
        session.spec = session.spec.bump(qa_items=session.spec.qa_items + tuple(items))
        session.state = ROUND2_QUESTIONED
    return items


def _completeness_signal(spec: RefinedSpec, items: list[QAItem]) -> bool:
    """Advisory: most new questions already answered by the spec text."""
    if not items:
        return False
    spec_words = set(w.lower() for w in word_tokens(render_spec(spec)))
    covered = 0
    for item in items:
        question_words = [w.lower() for w in word_tokens(item.question) if len(w) >= 4]
        if question_words and sum(w in spec_words for w in question_words) >= 0.8 * len(question_words):
            covered += 1
    return covered >= 0.8 * len(items)


ACCEPT = "accept"
ANSWER = "answer"
FLAG_LOOPBACK = "flag_loopback"


def resolve_questions(
    session: DialogueSession, answers: dict[int, tuple[str, str | None]]
) -> RefinedSpec:
    """Resolve open round-2 items.

    `answers` maps item index to an (action, text) pair where action is one
    of "accept", "answer" (text required) or "flag_loopback".
    """
    if session.state != ROUND2_QUESTIONED:
        raise InvalidState(f"resolve_questions illegal in state {session.state}")
    open_indices = [i for i, item in enumerate(session.spec.qa_items) if item.status == "open"]
    missing = [i for i in open_indices if i not in answers]
    if missing:
        raise UnaddressedQuestions(f"open items without an action: {missing}")
    for index in answers:
        if index not in open_indices:
            raise UnaddressedQuestions(f"item {index} is not open")
    flagged = [i for i, (action, _) in answers.items() if action == FLAG_LOOPBACK]
    if flagged and session.mode == FREE_QA:
        raise UnsupportedMode("free-qa has no round-1 sections to loop back to")
    if flagged and session.loopback_count >= session.loopback_budget:
        raise LoopbackBudgetExceeded(
            f"loop-back budget of {session.loopback_budget} already used"
        )
    for action, text in answers.values():
        if action not in (ACCEPT, ANSWER, FLAG_LOOPBACK):
            raise UnaddressedQuestions(f"unknown action {action!r}")
        if action == ANSWER and not text:
            raise UnaddressedQuestions("answer action requires text")

    items = list(session.spec.qa_items)
    for index, (action, text) in answers.items():
        item = items[index]
        if action == ACCEPT:
            items[index] = dataclasses.replace(
                item, final_answer=item.proposed_answer,
                final_answer_origin=MACHINE, status="answered",
            )
            session._log("human-answer", f"[{index}] accepted", "round2")
        elif action == ANSWER:
            items[index] = dataclasses.replace(
                item, final_answer=text, final_answer_origin="human", status="answered",
            )
            session._log("human-answer", f"[{index}] {text}", "round2")
        else:
            items[index] = dataclasses.replace(item, status="flagged-loopback")
            session._log("human-answer", f"[{index}] flagged for loop-back", "round2")
    session.spec = session.spec.bump(qa_items=tuple(items))
    if flagged:
        session.loopback_count += 1
        session.state = ROUND1_REVIEWED
    else:
        session.state = ROUND2_RESOLVED
    return session.spec


def finalize(session: DialogueSession) -> str:
    required = ROUND1_REVIEWED if session.mode == FREE_PARAPHRASE else ROUND2_RESOLVED
    if session.state != required:
        raise InvalidState(f"finalize illegal in state {session.state}")
    if session.mode == FREE_PARAPHRASE:
        refined = session.spec.free_text or ""
    else:
        refined = render_spec(session.spec)
    result = session.task.requirement_text + FINAL_SEPARATOR + refined
    session.final_requirement = result
    session.state = FINALIZED
    return result


class Engine:
    """Convenience facade binding a gateway to the session operations."""

    def __init__(self, gateway: ChatGateway):
        self.gateway = gateway

    def create_session(self, task: TaskSpec, mode: str) -> DialogueSession:
        return create_session(task, mode, self.gateway.config)

    def run_paraphrase(self, session: DialogueSession) -> RefinedSpec:
        return run_paraphrase(session, self.gateway)

    def submit_review(self, session, edits) -> RefinedSpec:
        return submit_review(session, edits)

    def run_questioning(self, session) -> list[QAItem]:
        return run_questioning(session, self.gateway)

    def resolve_questions(self, session, answers) -> RefinedSpec:
        return resolve_questions(session, answers)

    def finalize(self, session) -> str:
        return finalize(session)


# ---------------------------------------------------------------------------
# Persistence (schema session.v1)


def session_to_dict(session: DialogueSession) -> dict:
    return {
        "schema": SESSION_SCHEMA,
        "id": session.id,
        "task": task_to_dict(session.task),
        "mode": session.mode,
        "state": session.state,
        "spec": spec_to_dict(session.spec),
        "transcript": [dataclasses.asdict(entry) for entry in session.transcript],
        "config": {**dataclasses.asdict(session.config), "stop": list(session.config.stop)},
        "template_set_id": session.template_set_id,
        "loopback_count": session.loopback_count,
        "loopback_budget": session.loopback_budget,
        "final_requirement": session.final_requirement,
        "completeness_signal": session.completeness_signal,
    }


def session_from_dict(doc: dict) -> DialogueSession:
    if doc.get("schema") != SESSION_SCHEMA:
        raise ValueError(f"unsupported session schema {doc.get('schema')!r}")
    config_doc = dict(doc["config"])
    config_doc["stop"] = tuple(config_doc.get("stop", ()))
    return DialogueSession(
        id=doc["id"],
        task=task_from_dict(doc["task"]),
        mode=doc["mode"],
        state=doc["state"],
        spec=spec_from_dict(doc["spec"]),
        transcript=[TranscriptEntry(**entry) for entry in doc["transcript"]],
        config=ModelConfig(**config_doc),
        template_set_id=doc["template_set_id"],
        loopback_count=doc["loopback_count"],
        loopback_budget=doc["loopback_budget"],
        final_requirement=doc.get("final_requirement"),
        completeness_signal=doc.get("completeness_signal", False),
    )

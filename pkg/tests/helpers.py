"""Shared test helpers: fixture tasks, a reference transition model, and a
random-walk driver for the session state machine."""

from __future__ import annotations

import random

from chatcoder import engine as eng
from chatcoder.data import TaskSpec
from chatcoder.errors import ChatCoderError
from chatcoder.gateway import ChatGateway, ModelConfig
from chatcoder.prompts import AUTO_REFINE, CHATCODER, FREE_PARAPHRASE, FREE_QA
from chatcoder.testing import FakeModel


def simple_task(task_id="fx/0", entry_point="add"):
    return TaskSpec(
        task_id=task_id,
        dataset="humaneval",
        requirement_text=f'def {entry_point}(a, b):\n    """Return the sum of a and b."""\n',
        entry_point=entry_point,
        test_code="def check(candidate):\n    assert candidate(1, 2) == 3\n",
        canonical_solution="    return a + b\n",
    )


def live_fake_gateway(**model_kwargs) -> ChatGateway:
    cfg = ModelConfig(provider="live", **model_kwargs)
    return ChatGateway(
        cfg,
        transport=FakeModel({"add": "def add(a, b):\n    return a + b"}),
        rate_per_s=100000,
    )


OPS = ("paraphrase", "review", "questioning", "resolve_accept", "resolve_flag", "finalize")


def expected_accept(mode: str, state: str, op: str, loopback_count: int, budget: int) -> bool:
    """Reference legal-transition model, written independently of the engine."""
    if mode == CHATCODER:
        table = {
            "paraphrase": state == eng.INITIALIZED,
            "review": state in (eng.ROUND1_PROPOSED, eng.ROUND1_REVIEWED),
            "questioning": state == eng.ROUND1_REVIEWED,
            "resolve_accept": state == eng.ROUND2_QUESTIONED,
            "resolve_flag": state == eng.ROUND2_QUESTIONED and loopback_count < budget,
            "finalize": state == eng.ROUND2_RESOLVED,
        }
    elif mode == AUTO_REFINE:
        table = {
            "paraphrase": state == eng.INITIALIZED,
            "review": False,
            "questioning": state == eng.ROUND1_REVIEWED,
            "resolve_accept": False,
            "resolve_flag": False,
            "finalize": state == eng.ROUND2_RESOLVED,
        }
    elif mode == FREE_PARAPHRASE:
        table = {
            "paraphrase": state == eng.INITIALIZED,
            "review": state in (eng.ROUND1_PROPOSED, eng.ROUND1_REVIEWED),
            "questioning": False,
            "resolve_accept": False,
            "resolve_flag": False,
            "finalize": state == eng.ROUND1_REVIEWED,
        }
    elif mode == FREE_QA:
        table = {
            "paraphrase": False,
            "review": False,
            "questioning": state == eng.INITIALIZED,
            "resolve_accept": state == eng.ROUND2_QUESTIONED,
            "resolve_flag": False,
            "finalize": state == eng.ROUND2_RESOLVED,
        }
    else:
        raise ValueError(mode)
    return table[op]


def apply_op(session, gateway, op: str):
    if op == "paraphrase":
        eng.run_paraphrase(session, gateway)
    elif op == "review":
        eng.submit_review(session, {})
    elif op == "questioning":
        eng.run_questioning(session, gateway)
    elif op in ("resolve_accept", "resolve_flag"):
        answers = {}
        open_indices = [i for i, item in enumerate(session.spec.qa_items) if item.status == "open"]
        for pos, index in enumerate(open_indices):
            if op == "resolve_flag" and pos == 0:
                answers[index] = (eng.FLAG_LOOPBACK, None)
            else:
                answers[index] = (eng.ACCEPT, None)
        eng.resolve_questions(session, answers)
    elif op == "finalize":
        eng.finalize(session)
    else:
        raise ValueError(op)


def random_walk(mode: str, rng: random.Random, gateway=None, steps: int = 8) -> list[str]:
    """Run one random operation sequence; return a list of violations."""
    gateway = gateway or live_fake_gateway()
    session = eng.create_session(simple_task(), mode, gateway.config)
    violations: list[str] = []
    for _ in range(steps):
        op = rng.choice(OPS)
        state = session.state
        should_accept = expected_accept(mode, state, op, session.loopback_count, session.loopback_budget)
        before = eng.session_to_dict(session) if not should_accept else None
        try:
            apply_op(session, gateway, op)
            accepted = True
        except ChatCoderError:
            accepted = False
        if accepted != should_accept:
            violations.append(f"{mode}: op {op} in state {state} accepted={accepted}, expected {should_accept}")
        if not accepted and eng.session_to_dict(session) != before:
            violations.append(f"{mode}: rejected op {op} in state {state} mutated the session")
    return violations

"""Deterministic stub model provider for tests and fixture recording.

`FakeModel` is a gateway transport: it classifies the incoming prompt
(paraphrase / questioning / codegen) by the instruction markers the template
set emits and produces a well-formed reply that is a pure function of the
prompt, so record/replay round-trips are exactly reproducible.
"""

from __future__ import annotations

import re

from .refinement import Angle

_REQUIREMENT_RE = re.compile(r"---\n(.*?)\n---", re.DOTALL)
_ENTRY_RE = re.compile(r"implementation of the function `([^`]+)`")


def _requirement_of(prompt: str) -> str:
    match = _REQUIREMENT_RE.search(prompt)
    return match.group(1).strip() if match else prompt.strip()


class FakeModel:
    """Callable transport producing deterministic, parseable replies.

    `solutions` maps entry-point names to candidate code bodies; names in
    `prose_only` get a reply with no code block at all (extraction failure
    downstream). Unknown entry points get a stub that returns None.
    """

    def __init__(self, solutions: dict[str, str] | None = None,
                 prose_only: set[str] | None = None):
        self.solutions = solutions or {}
        self.prose_only = prose_only or set()

    def __call__(self, config, messages: list[dict]) -> str:
        prompt = messages[-1]["content"]
        if "Write a complete Python implementation" in prompt:
            return self._codegen_reply(prompt)
        if "from each of the following angles" in prompt:
            return self._angle_reply(prompt)
        if "Ask about whatever still confuses" in prompt or "Ask the user about whatever confuses" in prompt:
            return self._question_reply(prompt)
        return self._free_paraphrase_reply(prompt)

    def _angle_reply(self, prompt: str) -> str:
        requirement = _requirement_of(prompt)
        summary = " ".join(requirement.split())[:80]
        bodies = {
            Angle.KEY_CONCEPTS: f"The key concept is the task: {summary}.",
            Angle.METHOD_PURPOSE: "The method computes the value described by the requirement and returns it.",
            Angle.INPUT_REQUIREMENTS: "The inputs are the parameters named in the signature, assumed well formed.",
            Angle.OUTPUT_REQUIREMENTS: "The output is the value described by the requirement, in the natural Python type.",
            Angle.EDGE_CASES: "Empty inputs and boundary values should be handled by returning the natural result.",
            Angle.EXCEPTIONS_ERRORS: "No exceptions are expected for valid inputs; invalid inputs may raise TypeError.",
        }
        return "\n\n".join(f"### {angle.title}\n{bodies[angle]}" for angle in Angle)

    def _question_reply(self, prompt: str) -> str:
        return (
            "1. Q: Should the implementation validate argument types before computing?\n"
            "   A: Assume the arguments are always well formed and skip validation.\n"
            "2. Q: What should happen for empty input values?\n"
            "   A: Return the natural result for an empty input.\n"
        )

    def _free_paraphrase_reply(self, prompt: str) -> str:
        requirement = _requirement_of(prompt)
        summary = " ".join(requirement.split())
        return (
            f"In other words, the task is the following: {summary} "
            "The implementation should follow this description exactly."
        )

    def _codegen_reply(self, prompt: str) -> str:
        match = _ENTRY_RE.search(prompt)
        entry = match.group(1) if match else "solution"
        if entry in self.prose_only:
            return "I would start by thinking about the problem, but I cannot write the code."
        code = self.solutions.get(entry)
        if code is None:
            code = f"def {entry}(*args, **kwargs):\n    return None"
        return f"Here is the implementation:\n\n```python\n{code.rstrip()}\n```\n"

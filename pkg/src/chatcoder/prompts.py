"""Prompt construction for every protocol step, across the four modes.

Prompt wording lives in plain-text template files under templates/ with
{{placeholder}} slots; the template set id is a digest of their contents so
session records are self-describing across template revisions.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources

from .data import TaskSpec
from .errors import InvalidState, PrefixViolation, UnsupportedMode
from .refinement import Angle, RefinedSpec, render_spec

CHATCODER = "chatcoder"
FREE_PARAPHRASE = "free-paraphrase"
FREE_QA = "free-qa"
AUTO_REFINE = "auto-refine"

MODES = (CHATCODER, FREE_PARAPHRASE, FREE_QA, AUTO_REFINE)

_TEMPLATE_NAMES = (
    "paraphrase_angles.txt",
    "paraphrase_free.txt",
    "questioning_spec.txt",
    "questioning_free.txt",
    "codegen.txt",
)


def _load_templates() -> dict[str, str]:
    base = resources.files(__package__).joinpath("templates")
    return {name: base.joinpath(name).read_text(encoding="utf-8") for name in _TEMPLATE_NAMES}


_TEMPLATES = _load_templates()


def template_set_id() -> str:
    digest = hashlib.sha256()
    for name in _TEMPLATE_NAMES:
        digest.update(name.encode())
        digest.update(b"\0")
        digest.update(_TEMPLATES[name].encode())
    return digest.hexdigest()[:16]


def _fill(name: str, **slots: str) -> str:
    text = _TEMPLATES[name]
    for key, value in slots.items():
        text = text.replace("{{" + key + "}}", value)
    return text


@dataclass(frozen=True)
class Message:
    role: str  # system | user | assistant
    content: str


@dataclass(frozen=True)
class PromptBundle:
    messages: tuple[Message, ...]
    purpose: str  # paraphrase | questioning | codegen
    mode: str


def _angle_list() -> str:
    return "\n".join(f"- {angle.title}: {angle.definition}" for angle in Angle)


def build_paraphrase_prompt(task: TaskSpec, mode: str) -> PromptBundle:
    if mode == FREE_QA:
        raise UnsupportedMode("free-qa has no paraphrase round")
    if mode not in MODES:
        raise UnsupportedMode(f"unknown mode {mode!r}")
    if mode == FREE_PARAPHRASE:
        content = _fill("paraphrase_free.txt", requirement=task.requirement_text)
    else:
        content = _fill(
            "paraphrase_angles.txt",
            requirement=task.requirement_text,
            angles=_angle_list(),
        )
    return PromptBundle((Message("user", content),), "paraphrase", mode)


def build_questioning_prompt(task: TaskSpec, spec: RefinedSpec, mode: str) -> PromptBundle:
    if mode == FREE_PARAPHRASE:
        raise UnsupportedMode("free-paraphrase has no questioning round")
    if mode not in MODES:
        raise UnsupportedMode(f"unknown mode {mode!r}")
    if mode == FREE_QA:
        content = _fill("questioning_free.txt", requirement=task.requirement_text)
    else:
        rendered = render_spec(spec)
        if not spec.sections:
            raise InvalidState("questioning requires a completed paraphrase round")
        content = _fill(
            "questioning_spec.txt",
            requirement=task.requirement_text,
            spec=rendered,
        )
    return PromptBundle((Message("user", content),), "questioning", mode)


def format_shot(requirement: str, solution: str) -> str:
    return f"Requirement:\n{requirement}\nSolution:\n```python\n{solution.rstrip()}\n```\n\n"


def build_codegen_prompt(
    task: TaskSpec,
    final_requirement: str,
    shots: list[tuple[str, str]] = (),
) -> PromptBundle:
    if not final_requirement.startswith(task.requirement_text):
        raise PrefixViolation(
            "final requirement must start with the original requirement"
        )
    shot_text = "".join(format_shot(req, sol) for req, sol in shots)
    content = _fill(
        "codegen.txt",
        shots=shot_text,
        requirement=final_requirement,
        entry_point=task.entry_point,
    )
    return PromptBundle((Message("user", content),), "codegen", "codegen")

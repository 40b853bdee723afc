"""Refined-requirement domain model.

Holds the six-angle section structure, question/answer items, rendering and
parsing between structured specs and chat text, and token-level provenance
tracking for human edits.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import ParseFailure

MACHINE = "machine"
HUMAN = "human"

_TOKEN_RE = re.compile(r"\w+|\s+|[^\w\s]+")
_WORD_RE = re.compile(r"\w+")


class Angle(Enum):
    """The six fixed analysis angles, in stable rendering order."""

    KEY_CONCEPTS = "key_concepts"
    METHOD_PURPOSE = "method_purpose"
    INPUT_REQUIREMENTS = "input_requirements"
    OUTPUT_REQUIREMENTS = "output_requirements"
    EDGE_CASES = "edge_cases"
    EXCEPTIONS_ERRORS = "exceptions_errors"

    @property
    def title(self) -> str:
        return _ANGLE_TITLES[self]

    @property
    def definition(self) -> str:
        return _ANGLE_DEFINITIONS[self]


_ANGLE_TITLES = {
    Angle.KEY_CONCEPTS: "Key Concepts",
    Angle.METHOD_PURPOSE: "Method Purpose",
    Angle.INPUT_REQUIREMENTS: "Input Requirements",
    Angle.OUTPUT_REQUIREMENTS: "Output Requirements",
    Angle.EDGE_CASES: "Edge Cases",
    Angle.EXCEPTIONS_ERRORS: "Exceptions and Errors",
}

_ANGLE_DEFINITIONS = {
    Angle.KEY_CONCEPTS: "extract and explain the key concepts involved in the requirement, including objects and actions",
    Angle.METHOD_PURPOSE: "paraphrase the function provided by the method, describing the transformation of inputs and state in detail",
    Angle.INPUT_REQUIREMENTS: "extend the requirements for the method's inputs: the parameters' types, actual meaning, boundaries and properties",
    Angle.OUTPUT_REQUIREMENTS: "extend the requirements for the method's outputs: the types, the meaning and the format",
    Angle.EDGE_CASES: "extend possible edge cases and their solutions",
    Angle.EXCEPTIONS_ERRORS: "extend the solutions for possible exceptions and errors during execution",
}


def tokenize(text: str) -> list[str]:
    """Split text into maximal word-character runs, whitespace runs and
    punctuation runs; concatenation of the tokens reproduces the text."""
    return _TOKEN_RE.findall(text)


def word_tokens(text: str) -> list[str]:
    return _WORD_RE.findall(text)


@dataclass(frozen=True)
class ProvenanceSpan:
    text: str
    origin: str  # "machine" | "human"

    def __post_init__(self):
        if not self.text:
            raise ValueError("span text must be non-empty")
        if self.origin not in (MACHINE, HUMAN):
            raise ValueError(f"bad origin {self.origin!r}")


def merge_spans(spans: list[ProvenanceSpan]) -> tuple[ProvenanceSpan, ...]:
    """Coalesce adjacent spans of equal origin into maximal runs."""
    merged: list[ProvenanceSpan] = []
    for span in spans:
        if merged and merged[-1].origin == span.origin:
            merged[-1] = ProvenanceSpan(merged[-1].text + span.text, span.origin)
        else:
            merged.append(span)
    return tuple(merged)


@dataclass(frozen=True)
class AngleSection:
    angle: Angle
    spans: tuple[ProvenanceSpan, ...]
    status: str = "proposed"  # proposed | reviewed | deleted

    @staticmethod
    def machine(angle: Angle, text: str, status: str = "proposed") -> "AngleSection":
        spans = (ProvenanceSpan(text, MACHINE),) if text else ()
        return AngleSection(angle, spans, status)

    @property
    def text(self) -> str:
        return "".join(s.text for s in self.spans)


@dataclass(frozen=True)
class QAItem:
    question: str
    proposed_answer: str = ""
    final_answer: str | None = None
    final_answer_origin: str | None = None
    status: str = "open"  # open | answered | flagged-loopback


@dataclass(frozen=True)
class RefinedSpec:
    sections: dict[Angle, AngleSection] = field(default_factory=dict)
    qa_items: tuple[QAItem, ...] = ()
    version: int = 0
    free_text: str | None = None

    def bump(self, **changes) -> "RefinedSpec":
        """Return a copy with the given fields replaced and version + 1."""
        return dataclasses.replace(self, version=self.version + 1, **changes)


# ---------------------------------------------------------------------------
# Rendering and parsing


def render_spec(spec: RefinedSpec) -> str:
    """Deterministic text form: one titled block per non-deleted section in
    angle order, then answered question/answer pairs."""
    blocks: list[str] = []
    for angle in Angle:
        section = spec.sections.get(angle)
        if section is None or section.status == "deleted" or not section.text:
            continue
        blocks.append(f"### {angle.title}\n{section.text.strip()}")
    qa_lines: list[str] = []
    for item in spec.qa_items:
        if item.status != "answered" or item.final_answer is None:
            continue
        qa_lines.append(f"Q: {item.question}\nA: {item.final_answer}")
    if qa_lines:
        blocks.append("### Questions and Answers\n" + "\n".join(qa_lines))
    return "\n\n".join(blocks)


def _heading_pattern(title: str) -> re.Pattern:
    words = r"\s+".join(re.escape(w) for w in title.split())
    # "### Title", "1. Title", "Title:", "**Title**" and similar drift.
    return re.compile(
        rf"^\s*(?:#+\s*|\d+[\.\)]\s*|\*\*)?{words}(?:\*\*)?\s*:?\s*$",
        re.IGNORECASE,
    )


_HEADING_PATTERNS = {angle: _heading_pattern(angle.title) for angle in Angle}
# "Exceptions and Errors" drifts to "Exceptions/Errors" and "Exceptions & Errors".
_HEADING_PATTERNS[Angle.EXCEPTIONS_ERRORS] = re.compile(
    r"^\s*(?:#+\s*|\d+[\.\)]\s*|\*\*)?exceptions\s*(?:and|&|/)\s*errors(?:\*\*)?\s*:?\s*$",
    re.IGNORECASE,
)


def parse_angle_response(raw: str) -> tuple[dict[Angle, str], list[str]]:
    """Split a round-1 reply on the six angle headings.

    Returns the found angle texts plus one warning per missing angle.
    Raises ParseFailure when no heading is recognized at all.
    """
    lines = raw.splitlines()
    hits: list[tuple[int, Angle]] = []
    for i, line in enumerate(lines):
        for angle, pattern in _HEADING_PATTERNS.items():
            if pattern.match(line):
                hits.append((i, angle))
                break
    if not hits:
        raise ParseFailure("no angle headings recognized in reply")
    found: dict[Angle, str] = {}
    for pos, (start, angle) in enumerate(hits):
        end = hits[pos + 1][0] if pos + 1 < len(hits) else len(lines)
        body = "\n".join(lines[start + 1 : end]).strip()
        if angle not in found:  # first occurrence wins
            found[angle] = body
    warnings = [f"missing angle: {a.title}" for a in Angle if a not in found]
    return found, warnings


_Q_LABEL_RE = re.compile(r"^\s*(?:q(?:uestion)?\s*\d*\s*[:.\)]|\d+[\.\)])\s*(.*)$", re.IGNORECASE)
_A_LABEL_RE = re.compile(r"^\s*(?:a(?:nswer)?\s*\d*\s*[:.\)]|proposed answer\s*:)\s*(.*)$", re.IGNORECASE)


def parse_question_response(raw: str) -> list[QAItem]:
    """Extract (question, proposed answer) pairs from a Going-deep reply.

    A unit is a line labeled as a question or ending in '?'. Answer lines
    labeled Q.../A... (or un-labeled continuation text) attach to the most
    recent question. Every returned item has status "open".
    """
    items: list[tuple[str, list[str]]] = []
    for line in raw.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        a_match = _A_LABEL_RE.match(stripped)
        if a_match and items:
            items[-1][1].append(a_match.group(1).strip())
            continue
        q_match = _Q_LABEL_RE.match(stripped)
        if q_match:
            body = q_match.group(1).strip()
            nested = _Q_LABEL_RE.match(body)  # "1. Q: ..." numbering over a label
            if nested:
                body = nested.group(1).strip()
            if body:
                items.append((body, []))
            continue
        if stripped.endswith("?"):
            items.append((stripped, []))
        elif items:
            items[-1][1].append(stripped)
    if not items:
        raise ParseFailure("no question-like unit found in reply")
    return [
        QAItem(question=q, proposed_answer=" ".join(answers).strip(), status="open")
        for q, answers in items
    ]


# ---------------------------------------------------------------------------
# Provenance diffing

_WORD_MATCH_WEIGHT = 1_000_000  # word matches dominate separator matches


def _weighted_lcs_keep(before: list[str], after: list[str]) -> list[bool]:
    """For each token of `after`, whether it aligns to a token of `before`.

    The alignment is a longest common subsequence weighted so that matching a
    word token always beats matching any number of whitespace/punctuation
    tokens; this keeps the human word-token count equal to the plain LCS over
    word tokens alone.
    """
    n, m = len(before), len(after)
    weights = [
        _WORD_MATCH_WEIGHT if _WORD_RE.fullmatch(tok) else 1 for tok in after
    ]
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        row, prev = table[i], table[i - 1]
        b_tok = before[i - 1]
        for j in range(1, m + 1):
            if b_tok == after[j - 1]:
                row[j] = prev[j - 1] + weights[j - 1]
            else:
                row[j] = max(prev[j], row[j - 1])
    keep = [False] * m
    i, j = n, m
    while i > 0 and j > 0:
        if before[i - 1] == after[j - 1] and table[i][j] == table[i - 1][j - 1] + weights[j - 1]:
            keep[j - 1] = True
            i -= 1
            j -= 1
        elif table[i - 1][j] >= table[i][j - 1]:
            i -= 1
        else:
            j -= 1
    return keep


def _section_tokens(section: AngleSection) -> tuple[list[str], list[str]]:
    """Tokens of the section text with per-token origins."""
    tokens: list[str] = []
    origins: list[str] = []
    for span in section.spans:
        span_tokens = tokenize(span.text)
        tokens.extend(span_tokens)
        origins.extend([span.origin] * len(span_tokens))
    return tokens, origins


def diff_provenance(before: AngleSection, after_text: str) -> AngleSection:
    """Re-attribute a section after a whole-text human edit.

    Tokens aligned with the prior text keep their prior origin; inserted
    tokens become human-origin. Empty after_text deletes the section.
    """
    if after_text == "":
        return AngleSection(before.angle, (), "deleted")
    before_tokens, before_origins = _section_tokens(before)
    after_tokens = tokenize(after_text)
    keep = _weighted_lcs_keep(before_tokens, after_tokens)

    spans: list[ProvenanceSpan] = []
    bi = 0
    for j, token in enumerate(after_tokens):
        if keep[j]:
            # advance to the before-token this match consumed
            while before_tokens[bi] != token:
                bi += 1
            origin = before_origins[bi]
            bi += 1
        else:
            origin = HUMAN
        spans.append(ProvenanceSpan(token, origin))
    return AngleSection(before.angle, merge_spans(spans), "reviewed")


@dataclass(frozen=True)
class LaborStats:
    total_tokens: int
    human_tokens: int

    @property
    def fraction(self) -> float:
        return self.human_tokens / max(self.total_tokens, 1)


def labor_stats(spec: RefinedSpec) -> LaborStats:
    """Word-token counts over all non-deleted sections plus final answers."""
    total = 0
    human = 0
    for section in spec.sections.values():
        if section.status == "deleted":
            continue
        for span in section.spans:
            count = len(word_tokens(span.text))
            total += count
            if span.origin == HUMAN:
                human += count
    for item in spec.qa_items:
        if item.status == "answered" and item.final_answer:
            count = len(word_tokens(item.final_answer))
            total += count
            if item.final_answer_origin == HUMAN:
                human += count
    if spec.free_text:
        total += len(word_tokens(spec.free_text))
    return LaborStats(total_tokens=total, human_tokens=human)


# ---------------------------------------------------------------------------
# JSON serialization (schema refined_spec.v1)

SPEC_SCHEMA = "refined_spec.v1"


def spec_to_dict(spec: RefinedSpec) -> dict:
    return {
        "schema": SPEC_SCHEMA,
        "version": spec.version,
        "free_text": spec.free_text,
        "sections": [
            {
                "angle": angle.value,
                "status": section.status,
                "spans": [{"text": s.text, "origin": s.origin} for s in section.spans],
            }
            for angle, section in sorted(spec.sections.items(), key=lambda kv: list(Angle).index(kv[0]))
        ],
        "qa_items": [
            {
                "question": item.question,
                "proposed_answer": item.proposed_answer,
                "final_answer": item.final_answer,
                "final_answer_origin": item.final_answer_origin,
                "status": item.status,
            }
            for item in spec.qa_items
        ],
    }


def spec_from_dict(doc: dict) -> RefinedSpec:
    if doc.get("schema") != SPEC_SCHEMA:
        raise ValueError(f"unsupported spec schema {doc.get('schema')!r}")
    sections = {}
    for entry in doc["sections"]:
        angle = Angle(entry["angle"])
        spans = tuple(ProvenanceSpan(s["text"], s["origin"]) for s in entry["spans"])
        sections[angle] = AngleSection(angle, spans, entry["status"])
    qa_items = tuple(
        QAItem(
            question=e["question"],
            proposed_answer=e["proposed_answer"],
            final_answer=e["final_answer"],
            final_answer_origin=e["final_answer_origin"],
            status=e["status"],
        )
        for e in doc["qa_items"]
    )
    return RefinedSpec(
        sections=sections,
        qa_items=qa_items,
        version=doc["version"],
        free_text=doc.get("free_text"),
    )


def spec_to_json(spec: RefinedSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2, sort_keys=True)

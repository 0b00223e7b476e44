"""Built-in prompt templates: framing patterns and the task-instruction catalog.

The canonical template text ships as package data (``data/prompt_templates.json``)
so that the wording is reviewable and checksum-testable as plain data rather
than buried in code.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources

PATTERN_PLACEHOLDERS = ("{essay_prompt}", "{task_instruction}", "{essay}")
INSTRUCTION_PLACEHOLDERS = ("{rubric}", "{scoring_range}")

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


class TemplateDataError(Exception):
    """Shipped template data is missing or malformed."""


class PatternKind(str, Enum):
    """Outer framing of the LLM prompt, in canonical (tie-breaking) order."""

    BASE = "base"
    TEACHERS_ASSISTANT = "teachers_assistant"
    EDUCATIONAL_RESEARCHER = "educational_researcher"
    CREATIVE_WRITING_MENTOR = "creative_writing_mentor"

    @property
    def label(self) -> str:
        return _PATTERN_LABELS[self]

    @property
    def order(self) -> int:
        return list(PatternKind).index(self)


_PATTERN_LABELS = {
    PatternKind.BASE: "Base",
    PatternKind.TEACHERS_ASSISTANT: "TA",
    PatternKind.EDUCATIONAL_RESEARCHER: "ER",
    PatternKind.CREATIVE_WRITING_MENTOR: "CWM",
}


class InstructionKind(str, Enum):
    """Which tasks the model is asked to do, and in what order."""

    SCORING = "scoring"
    FEEDBACK = "feedback"
    SCORING_THEN_FEEDBACK = "scoring_feedback"
    FEEDBACK_THEN_SCORING = "feedback_scoring"
    SCORING_THEN_FEEDBACK_COT = "scoring_feedback_cot"
    FEEDBACK_DCOT_THEN_SCORING = "feedback_dcot_scoring"
    SCORING_THEN_EXPLANATION = "scoring_explanation"
    EXPLANATION_THEN_SCORING = "explanation_scoring"

    @property
    def label(self) -> str:
        return _INSTRUCTION_LABELS[self]

    @property
    def order(self) -> int:
        return list(InstructionKind).index(self)


_INSTRUCTION_LABELS = {
    InstructionKind.SCORING: "Scoring",
    InstructionKind.FEEDBACK: "Feedback",
    InstructionKind.SCORING_THEN_FEEDBACK: "Scoring->Feedback",
    InstructionKind.FEEDBACK_THEN_SCORING: "Feedback->Scoring",
    InstructionKind.SCORING_THEN_FEEDBACK_COT: "Scoring->Feedback_CoT",
    InstructionKind.FEEDBACK_DCOT_THEN_SCORING: "Feedback_dCoT->Scoring",
    InstructionKind.SCORING_THEN_EXPLANATION: "Scoring->Explanation",
    InstructionKind.EXPLANATION_THEN_SCORING: "Explanation->Scoring",
}


class ShotMode(str, Enum):
    ZERO = "zero"
    ONE = "one"
    FEW = "few"


@dataclass(frozen=True)
class PromptPattern:
    """A prompt frame with {essay_prompt}, {task_instruction}, {essay} slots."""

    kind: PatternKind
    template: str

    def __post_init__(self) -> None:
        for placeholder in PATTERN_PLACEHOLDERS:
            n = self.template.count(placeholder)
            if n != 1:
                raise TemplateDataError(
                    f"pattern {self.kind.value!r} must contain {placeholder} "
                    f"exactly once, found {n}"
                )


@dataclass(frozen=True)
class TaskInstruction:
    """One paraphrase of a task instruction; may use {rubric} and {scoring_range}."""

    kind: InstructionKind
    paraphrase_index: int
    template: str

    def __post_init__(self) -> None:
        if not 1 <= self.paraphrase_index <= 4:
            raise TemplateDataError(
                f"paraphrase_index must be 1-4, got {self.paraphrase_index}"
            )

    def placeholders(self) -> list[str]:
        return ["{" + name + "}" for name in _PLACEHOLDER_RE.findall(self.template)]


@dataclass(frozen=True)
class TemplateCatalog:
    patterns: dict[PatternKind, PromptPattern]
    instructions: dict[InstructionKind, tuple[TaskInstruction, ...]]

    def pattern(self, kind: PatternKind) -> PromptPattern:
        return self.patterns[kind]

    def instruction(self, kind: InstructionKind, paraphrase_index: int) -> TaskInstruction:
        if not 1 <= paraphrase_index <= 4:
            raise TemplateDataError(f"paraphrase_index must be 1-4, got {paraphrase_index}")
        return self.instructions[kind][paraphrase_index - 1]


def template_data_bytes() -> bytes:
    """Raw bytes of the shipped template file (for checksum verification)."""
    return resources.files("promptgrade.data").joinpath("prompt_templates.json").read_bytes()


@lru_cache(maxsize=1)
def template_catalog() -> TemplateCatalog:
    """Load and validate the shipped patterns and instruction paraphrases."""
    data = json.loads(template_data_bytes().decode("utf-8"))

    patterns: dict[PatternKind, PromptPattern] = {}
    for kind in PatternKind:
        try:
            template = data["patterns"][kind.value]
        except KeyError as exc:
            raise TemplateDataError(f"missing pattern {kind.value!r}") from exc
        patterns[kind] = PromptPattern(kind=kind, template=template)

    instructions: dict[InstructionKind, tuple[TaskInstruction, ...]] = {}
    for kind in InstructionKind:
        try:
            paraphrases = data["instructions"][kind.value]
        except KeyError as exc:
            raise TemplateDataError(f"missing instruction type {kind.value!r}") from exc
        if len(paraphrases) != 4:
            raise TemplateDataError(
                f"instruction type {kind.value!r} must have 4 paraphrases, "
                f"found {len(paraphrases)}"
            )
        instructions[kind] = tuple(
            TaskInstruction(kind=kind, paraphrase_index=i + 1, template=tpl)
            for i, tpl in enumerate(paraphrases)
        )

    return TemplateCatalog(patterns=patterns, instructions=instructions)

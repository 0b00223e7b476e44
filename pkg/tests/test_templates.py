from __future__ import annotations

import hashlib

import pytest

from promptgrade.templates import (
    InstructionKind,
    PATTERN_PLACEHOLDERS,
    PatternKind,
    ShotMode,
    TemplateDataError,
    TaskInstruction,
    template_catalog,
    template_data_bytes,
)

# Frozen digest of the shipped template data; any wording change must be
# deliberate and re-pinned here.
TEMPLATE_DATA_SHA256 = "66abf294127add356881226b4e0310b58843783ed9558389637aa7051dd91e9a"


def test_template_data_checksum():
    assert hashlib.sha256(template_data_bytes()).hexdigest() == TEMPLATE_DATA_SHA256


def test_catalog_cardinality():
    catalog = template_catalog()
    assert len(catalog.patterns) == 4
    assert len(catalog.instructions) == 8
    assert all(len(p) == 4 for p in catalog.instructions.values())


def test_patterns_contain_each_placeholder_once():
    catalog = template_catalog()
    for pattern in catalog.patterns.values():
        for placeholder in PATTERN_PLACEHOLDERS:
            assert pattern.template.count(placeholder) == 1


@pytest.mark.parametrize(
    "kind, anchor",
    [
        (PatternKind.BASE, "You are given an essay written by a student"),
        (PatternKind.TEACHERS_ASSISTANT, "Imagine you are a teacher's assistant"),
        (PatternKind.EDUCATIONAL_RESEARCHER, '#### Essay Prompt: "'),
        (PatternKind.CREATIVE_WRITING_MENTOR, "### Critique Instructions:"),
    ],
)
def test_pattern_anchors(kind, anchor):
    assert anchor in template_catalog().pattern(kind).template


@pytest.mark.parametrize(
    "kind, paraphrase, anchor",
    [
        (InstructionKind.SCORING, 1, "grade the essay using those ranges"),
        (InstructionKind.FEEDBACK, 1, "Analyze the given essay using the following rubric"),
        (InstructionKind.SCORING_THEN_FEEDBACK, 1, "Provide comprehensive feedback"),
        (InstructionKind.FEEDBACK_THEN_SCORING, 1, "Then give the final score."),
        (InstructionKind.SCORING_THEN_FEEDBACK_COT, 1, "Let's think step by step."),
        (InstructionKind.FEEDBACK_DCOT_THEN_SCORING, 1, "As a final step, output the score at the end."),
        (InstructionKind.SCORING_THEN_EXPLANATION, 1, "Provide an explanation for your score as well."),
        (InstructionKind.EXPLANATION_THEN_SCORING, 1, "give a final grade."),
    ],
)
def test_instruction_anchors(kind, paraphrase, anchor):
    assert anchor in template_catalog().instruction(kind, paraphrase).template


def test_cot_phrase_is_embedded_not_injected():
    catalog = template_catalog()
    assert "Let's think step by step." in catalog.instruction(
        InstructionKind.SCORING_THEN_FEEDBACK_COT, 1
    ).template
    assert "Let's think step by step." in catalog.instruction(
        InstructionKind.FEEDBACK_DCOT_THEN_SCORING, 1
    ).template


def test_scoring_instructions_use_range_not_rubric():
    catalog = template_catalog()
    for paraphrase in range(1, 5):
        template = catalog.instruction(InstructionKind.SCORING, paraphrase).template
        assert "{scoring_range}" in template
        assert "{rubric}" not in template


def test_feedback_instructions_use_rubric_not_range():
    catalog = template_catalog()
    for paraphrase in range(1, 5):
        template = catalog.instruction(InstructionKind.FEEDBACK, paraphrase).template
        assert "{rubric}" in template
        assert "{scoring_range}" not in template


def test_paraphrase_index_bounds():
    catalog = template_catalog()
    with pytest.raises(TemplateDataError):
        catalog.instruction(InstructionKind.SCORING, 5)
    with pytest.raises(TemplateDataError):
        TaskInstruction(kind=InstructionKind.SCORING, paraphrase_index=0, template="x")


def test_enum_orders_are_canonical():
    assert [p.label for p in PatternKind] == ["Base", "TA", "ER", "CWM"]
    assert len(list(InstructionKind)) == 8
    assert [s.value for s in ShotMode] == ["zero", "one", "few"]

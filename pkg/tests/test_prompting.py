from __future__ import annotations

import random
from pathlib import Path

import pytest

from promptgrade.corpus import Exemplar, ScoreRange
from promptgrade.prompting import (
    AssemblyError,
    DEFAULT_PROMPT_BUDGET,
    assemble,
    format_exemplar,
    render_instruction,
    render_pattern,
    render_rubric,
    render_scoring_range,
    select_few_shot,
    select_one_shot,
)
from promptgrade.templates import (
    InstructionKind,
    PatternKind,
    ShotMode,
    TaskInstruction,
    template_catalog,
)

from conftest import GOLDEN_EXEMPLAR, make_essay_set

GOLDEN_DIR = Path(__file__).parent / "golden"
PLACEHOLDERS = ("{essay}", "{rubric}", "{scoring_range}", "{essay_prompt}", "{task_instruction}")


def catalog():
    return template_catalog()


class TestRenderInstruction:
    def test_scoring_paraphrase_one_with_range(self):
        essay_set = make_essay_set(1, 1, 6)
        text = render_instruction(catalog().instruction(InstructionKind.SCORING, 1), essay_set)
        assert text == (
            "Given this essay that was written for the given prompt, grade the "
            "essay using those ranges: 1–6."
        )

    def test_feedback_paraphrase_one_renders_rubric(self, golden_set):
        text = render_instruction(catalog().instruction(InstructionKind.FEEDBACK, 1), golden_set)
        assert "Score 3: The response demonstrates an understanding" in text
        assert "- Addresses the demands of the question" in text
        assert "{rubric}" not in text

    def test_rubric_is_rendered_descending(self, golden_set):
        text = render_rubric(golden_set.rubric)
        positions = [text.index(f"Score {s}:") for s in (3, 2, 1, 0)]
        assert positions == sorted(positions)

    def test_template_without_placeholders_is_identity(self):
        instruction = TaskInstruction(
            kind=InstructionKind.FEEDBACK, paraphrase_index=1, template="Give feedback."
        )
        assert render_instruction(instruction, make_essay_set()) == "Give feedback."

    def test_unknown_placeholder_named_in_error(self):
        instruction = TaskInstruction(
            kind=InstructionKind.FEEDBACK, paraphrase_index=1, template="Use {grading_policy}."
        )
        with pytest.raises(AssemblyError, match="grading_policy"):
            render_instruction(instruction, make_essay_set())

    def test_scoring_range_format(self):
        assert render_scoring_range(ScoreRange(min=0, max=3)) == "0–3"


class TestRenderPattern:
    def test_base_pattern_opening(self):
        text = render_pattern(
            catalog().pattern(PatternKind.BASE), "A task.", "An instruction.", "An essay."
        )
        assert text.startswith("You are given an essay written by a student")

    def test_er_pattern_heading(self):
        text = render_pattern(
            catalog().pattern(PatternKind.EDUCATIONAL_RESEARCHER), "A task.", "Do it.", "Text."
        )
        assert '#### Essay Prompt: "A task."' in text

    def test_length_arithmetic(self):
        pattern = catalog().pattern(PatternKind.BASE)
        a, b, c = "x" * 17, "y" * 31, "z" * 53
        text = render_pattern(pattern, a, b, c)
        placeholder_length = sum(
            len(p) for p in ("{essay_prompt}", "{task_instruction}", "{essay}")
        )
        assert len(text) == len(pattern.template) - placeholder_length + 17 + 31 + 53

    def test_empty_essay_rejected(self):
        with pytest.raises(AssemblyError, match="essay"):
            render_pattern(catalog().pattern(PatternKind.BASE), "A task.", "Do it.", "")


class TestFormatExemplar:
    def test_three_block_layout(self):
        block = format_exemplar(Exemplar(essay_text="Sample.", reasoning="Thin.", score=3))
        assert block.startswith('Essay: "Sample."')
        assert "\n\nReasoning: Thin.\n\n" in block
        assert block.endswith("Scores: {Overall: 3}")

    def test_empty_reasoning_keeps_line(self):
        block = format_exemplar(Exemplar(essay_text="Sample.", reasoning="", score=2))
        assert "\nReasoning: \n" in block

    def test_score_zero(self):
        block = format_exemplar(Exemplar(essay_text="Sample.", reasoning="r", score=0))
        assert block.endswith("Scores: {Overall: 0}")


def ex(score, size=10):
    return Exemplar(essay_text="e" * size, reasoning="r" * size, score=score)


class TestSelectOneShot:
    def test_medium_score_picked(self):
        pool = [ex(1), ex(3), ex(6)]
        chosen = select_one_shot(pool, ScoreRange(min=1, max=6), random.Random(0))
        # oracle: medium = 3; candidates minimizing |score - 3| = exactly the 3
        assert chosen.score == 3

    def test_single_candidate(self):
        pool = [ex(5)]
        assert select_one_shot(pool, ScoreRange(min=1, max=6), random.Random(0)) is pool[0]

    def test_published_style_exemplar_selectable_at_medium_three(self):
        justified = Exemplar(
            essay_text=GOLDEN_EXEMPLAR.essay_text, reasoning=GOLDEN_EXEMPLAR.reasoning, score=3
        )
        chosen = select_one_shot([justified, ex(5), ex(6)], ScoreRange(min=1, max=6), random.Random(1))
        assert chosen is justified

    def test_nearest_fallback(self):
        pool = [ex(0), ex(3)]
        chosen = select_one_shot(pool, ScoreRange(min=0, max=4), random.Random(0))
        # medium = 2; nearest pool score is 3 (distance 1 beats 0's distance 2)
        assert chosen.score == 3

    def test_uniform_among_ties_is_seed_deterministic(self):
        pool = [ex(3, size=5), ex(3, size=7), ex(3, size=9)]
        picks = {select_one_shot(pool, ScoreRange(1, 6), random.Random(s)).essay_text for s in range(20)}
        assert len(picks) > 1  # ties actually randomized
        again = select_one_shot(pool, ScoreRange(1, 6), random.Random(4))
        assert again == select_one_shot(pool, ScoreRange(1, 6), random.Random(4))

    def test_empty_pool_rejected(self):
        with pytest.raises(AssemblyError):
            select_one_shot([], ScoreRange(0, 3), random.Random(0))


def join_render(exemplars):
    return "\n\n".join(format_exemplar(e) for e in exemplars)


class TestSelectFewShot:
    def test_one_tiny_exemplar_per_score_large_budget(self):
        pool = [ex(0), ex(1), ex(2), ex(3)]
        chosen = select_few_shot(pool, ScoreRange(0, 3), 10_000, random.Random(0), join_render)
        # greedy-rule oracle: max first, min second, then remaining high to low
        assert [e.score for e in chosen] == [3, 0, 2, 1]

    def test_budget_smaller_than_any_exemplar(self):
        pool = [ex(0, size=100), ex(3, size=100)]
        chosen = select_few_shot(pool, ScoreRange(0, 3), 10, random.Random(0), join_render)
        assert chosen == []

    def test_every_prefix_fits_budget(self):
        pool = [ex(s, size=40) for s in (0, 1, 1, 2, 3, 3)]
        budget = 400
        chosen = select_few_shot(pool, ScoreRange(0, 3), budget, random.Random(2), join_render)
        for i in range(1, len(chosen) + 1):
            assert len(join_render(chosen[:i])) <= budget

    def test_cycling_allows_repeated_scores(self):
        pool = [ex(3), ex(0), ex(2, size=4), ex(2, size=5), ex(2, size=6)]
        chosen = select_few_shot(pool, ScoreRange(0, 3), 10_000, random.Random(0), join_render)
        assert [e.score for e in chosen][:2] == [3, 0]
        assert [e.score for e in chosen][2:] == [2, 2, 2]

    def test_two_distinct_scores_stop_after_extremes(self):
        pool = [ex(0), ex(0), ex(3), ex(3)]
        chosen = select_few_shot(pool, ScoreRange(0, 3), 10_000, random.Random(0), join_render)
        assert [e.score for e in chosen] == [3, 0]

    def test_deterministic_given_seed(self):
        pool = [ex(s, size=s + 3) for s in (0, 1, 1, 2, 3, 3)]
        first = select_few_shot(pool, ScoreRange(0, 3), 500, random.Random(9), join_render)
        second = select_few_shot(pool, ScoreRange(0, 3), 500, random.Random(9), join_render)
        assert first == second


class TestAssemble:
    def test_golden_base_scoring_zero(self, golden_set, golden_essay):
        expected = (GOLDEN_DIR / "prompt_base_scoring1_zero.txt").read_text(encoding="utf-8")
        prompt = assemble(
            catalog().pattern(PatternKind.BASE),
            catalog().instruction(InstructionKind.SCORING, 1),
            ShotMode.ZERO,
            golden_set,
            golden_essay,
            random.Random(0),
        )
        assert prompt.text == expected

    def test_golden_er_feedback_one(self, golden_set, golden_essay):
        expected = (GOLDEN_DIR / "prompt_er_feedback1_one.txt").read_text(encoding="utf-8")
        prompt = assemble(
            catalog().pattern(PatternKind.EDUCATIONAL_RESEARCHER),
            catalog().instruction(InstructionKind.FEEDBACK, 1),
            ShotMode.ONE,
            golden_set,
            golden_essay,
            random.Random(0),
        )
        assert prompt.text == expected

    def test_same_seed_is_byte_identical(self, golden_set, golden_essay):
        def build():
            return assemble(
                catalog().pattern(PatternKind.TEACHERS_ASSISTANT),
                catalog().instruction(InstructionKind.SCORING_THEN_FEEDBACK, 2),
                ShotMode.FEW,
                golden_set,
                golden_essay,
                random.Random(123),
            )

        assert build().text == build().text

    def test_one_shot_records_exactly_one_exemplar_index(self, golden_set, golden_essay):
        prompt = assemble(
            catalog().pattern(PatternKind.EDUCATIONAL_RESEARCHER),
            catalog().instruction(InstructionKind.FEEDBACK, 1),
            ShotMode.ONE,
            golden_set,
            golden_essay,
            random.Random(0),
        )
        assert len(prompt.meta.exemplar_indices) == 1
        assert prompt.meta.shot_mode is ShotMode.ONE

    def test_character_count_matches_text(self, golden_set, golden_essay):
        prompt = assemble(
            catalog().pattern(PatternKind.BASE),
            catalog().instruction(InstructionKind.SCORING, 1),
            ShotMode.ZERO,
            golden_set,
            golden_essay,
            random.Random(0),
        )
        assert prompt.meta.character_count == len(prompt.text)

    def test_zero_shot_grid_is_128_distinct_strategies(self, golden_set, golden_essay):
        seen = set()
        for pattern in PatternKind:
            for kind in InstructionKind:
                for paraphrase in range(1, 5):
                    prompt = assemble(
                        catalog().pattern(pattern),
                        catalog().instruction(kind, paraphrase),
                        ShotMode.ZERO,
                        golden_set,
                        golden_essay,
                        random.Random(0),
                    )
                    seen.add(
                        (prompt.meta.pattern, prompt.meta.instruction, prompt.meta.paraphrase_index)
                    )
        assert len(seen) == 128

    def test_placeholder_hygiene_over_grid(self, golden_set, golden_essay):
        for pattern in PatternKind:
            for shot in ShotMode:
                prompt = assemble(
                    catalog().pattern(pattern),
                    catalog().instruction(InstructionKind.SCORING_THEN_FEEDBACK, 3),
                    shot,
                    golden_set,
                    golden_essay,
                    random.Random(5),
                )
                for placeholder in PLACEHOLDERS:
                    assert placeholder not in prompt.text

    def test_few_mode_budget_compliance_sampled(self):
        from promptgrade.corpus import Essay

        rng = random.Random(99)
        for trial in range(50):
            pool = tuple(
                ex(rng.randint(0, 3), size=rng.randint(20, 600)) for _ in range(rng.randint(1, 8))
            )
            essay_set = make_essay_set(3, 0, 3, exemplars=pool)
            essay = Essay(
                essay_id=trial, set_id=3, text="w" * rng.randint(50, 2500), gold_score=1
            )
            prompt = assemble(
                catalog().pattern(PatternKind.BASE),
                catalog().instruction(InstructionKind.SCORING_THEN_FEEDBACK, 1),
                ShotMode.FEW,
                essay_set,
                essay,
                random.Random(trial),
            )
            if prompt.meta.exemplar_indices:
                assert prompt.meta.character_count <= DEFAULT_PROMPT_BUDGET

    def test_mismatched_set_rejected(self, golden_set):
        from promptgrade.corpus import Essay

        stray = Essay(essay_id=7, set_id=5, text="Text.", gold_score=1)
        with pytest.raises(AssemblyError):
            assemble(
                catalog().pattern(PatternKind.BASE),
                catalog().instruction(InstructionKind.SCORING, 1),
                ShotMode.ZERO,
                golden_set,
                stray,
                random.Random(0),
            )

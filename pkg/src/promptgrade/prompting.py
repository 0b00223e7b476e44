"""Deterministic prompt assembly over the strategy grid.

A strategy is (prompt pattern, task instruction paraphrase, shot mode). All
substitution is plain string replacement over single-occurrence placeholders;
randomness enters only through the caller-provided seeded rng used for
exemplar selection, so identical inputs and seed yield identical bytes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import Essay, EssaySet, Exemplar, RubricLevel, ScoreRange
from .templates import (
    INSTRUCTION_PLACEHOLDERS,
    InstructionKind,
    PatternKind,
    PromptPattern,
    ShotMode,
    TaskInstruction,
)

# Assembled few-shot prompts are capped at this many characters; exemplars are
# added only while the whole prompt stays under the cap.
DEFAULT_PROMPT_BUDGET = 5120


class AssemblyError(Exception):
    """A prompt could not be assembled from the given components."""


def render_scoring_range(score_range: ScoreRange) -> str:
    return f"{score_range.min}\u2013{score_range.max}"


def render_rubric(rubric: Sequence[RubricLevel]) -> str:
    """Rubric as text, highest score first, one line per level plus bullets."""
    lines: list[str] = []
    for level in sorted(rubric, key=lambda lv: lv.score, reverse=True):
        lines.append(f"Score {level.score}: {level.description}")
        lines.extend(f"- {bullet}" for bullet in level.bullets)
    return "\n".join(lines)


def render_instruction(instruction: TaskInstruction, essay_set: EssaySet) -> str:
    """Fill {rubric} and {scoring_range}; unknown placeholders are an error."""
    values = {
        "{rubric}": render_rubric(essay_set.rubric),
        "{scoring_range}": render_scoring_range(essay_set.score_range),
    }
    for placeholder in instruction.placeholders():
        if placeholder not in values:
            raise AssemblyError(f"no value for placeholder {placeholder}")
    text = instruction.template
    for placeholder in INSTRUCTION_PLACEHOLDERS:
        text = text.replace(placeholder, values[placeholder])
    return text


def format_exemplar(exemplar: Exemplar) -> str:
    """Three-block exemplar: quoted essay, reasoning, overall score."""
    return (
        f'Essay: "{exemplar.essay_text}"\n'
        "\n"
        f"Reasoning: {exemplar.reasoning}\n"
        "\n"
        f"Scores: {{Overall: {exemplar.score}}}"
    )


def render_pattern(
    pattern: PromptPattern,
    essay_prompt: str,
    instruction_text: str,
    essay_text: str,
    exemplars: Sequence[Exemplar] = (),
) -> str:
    """Substitute the three slots; exemplars go between instruction and essay."""
    if not essay_prompt or not instruction_text or not essay_text:
        empty = (
            "essay_prompt"
            if not essay_prompt
            else "task_instruction" if not instruction_text else "essay"
        )
        raise AssemblyError(f"empty substitution value for {{{empty}}}")

    text = pattern.template
    text = text.replace("{essay_prompt}", essay_prompt)
    text = text.replace("{task_instruction}", instruction_text)
    if exemplars:
        lines = text.split("\n")
        essay_line = next(i for i, line in enumerate(lines) if "{essay}" in line)
        block = "\n\n".join(format_exemplar(e) for e in exemplars)
        lines[essay_line:essay_line] = ["", block, ""]
        text = "\n".join(lines)
    return text.replace("{essay}", essay_text)


def select_one_shot(
    pool: Sequence[Exemplar], score_range: ScoreRange, rng: random.Random
) -> Exemplar:
    """Pick an exemplar at the medium score, floor((min+max)/2).

    Falls back to the nearest available score; equidistant candidates from
    both sides are pooled. Ties are broken uniformly by the seeded rng.
    """
    if not pool:
        raise AssemblyError("one-shot selection needs a non-empty exemplar pool")
    medium = score_range.medium
    best = min(abs(e.score - medium) for e in pool)
    candidates = [e for e in pool if abs(e.score - medium) == best]
    return rng.choice(candidates)


def select_few_shot(
    pool: Sequence[Exemplar],
    score_range: ScoreRange,
    budget: int,
    rng: random.Random,
    render_fn: Callable[[list[Exemplar]], str],
) -> list[Exemplar]:
    """Greedy budgeted selection: one best-score, one worst-score, then the
    other scores from high to low, cycling while anything still fits.

    `render_fn` must render the full prompt for a candidate selection; a
    candidate is kept only if the rendered prompt stays within `budget`
    characters. Candidates that overflow are discarded for good (the prompt
    only grows). May return an empty list if nothing fits.
    """
    if not pool:
        raise AssemblyError("few-shot selection needs a non-empty exemplar pool")
    if budget <= 0:
        raise AssemblyError(f"budget must be positive, got {budget}")

    available = list(range(len(pool)))
    selected: list[int] = []

    def take(score: int) -> bool:
        while True:
            candidates = [i for i in available if pool[i].score == score]
            if not candidates:
                return False
            pick = rng.choice(candidates)
            available.remove(pick)
            attempt = [pool[i] for i in selected] + [pool[pick]]
            if len(render_fn(attempt)) <= budget:
                selected.append(pick)
                return True

    scores = sorted({e.score for e in pool})
    max_score, min_score = scores[-1], scores[0]
    take(max_score)
    if min_score != max_score:
        take(min_score)
    other_scores = [s for s in reversed(scores) if s not in (max_score, min_score)]
    while available and other_scores:
        added = False
        for score in other_scores:
            if not available:
                break
            if take(score):
                added = True
        if not added:
            break
    return [pool[i] for i in selected]


@dataclass(frozen=True)
class PromptMeta:
    pattern: PatternKind
    instruction: InstructionKind
    paraphrase_index: int
    shot_mode: ShotMode
    exemplar_indices: tuple[int, ...]
    set_id: int
    essay_id: int
    character_count: int


@dataclass(frozen=True)
class AssembledPrompt:
    text: str
    meta: PromptMeta

    def __post_init__(self) -> None:
        if self.meta.character_count != len(self.text):
            raise AssemblyError("character_count does not match prompt length")


def assemble(
    pattern: PromptPattern,
    instruction: TaskInstruction,
    shot_mode: ShotMode,
    essay_set: EssaySet,
    essay: Essay,
    rng: random.Random,
    budget: int = DEFAULT_PROMPT_BUDGET,
) -> AssembledPrompt:
    """Render the full prompt for one (strategy, essay) pair."""
    if essay.set_id != essay_set.set_id:
        raise AssemblyError(
            f"essay {essay.essay_id} belongs to set {essay.set_id}, "
            f"not set {essay_set.set_id}"
        )
    instruction_text = render_instruction(instruction, essay_set)

    if shot_mode is ShotMode.ZERO:
        chosen: list[Exemplar] = []
    elif shot_mode is ShotMode.ONE:
        chosen = [select_one_shot(essay_set.exemplars, essay_set.score_range, rng)]
    else:
        chosen = select_few_shot(
            essay_set.exemplars,
            essay_set.score_range,
            budget,
            rng,
            lambda exs: render_pattern(
                pattern, essay_set.essay_prompt, instruction_text, essay.text, exemplars=exs
            ),
        )

    text = render_pattern(
        pattern, essay_set.essay_prompt, instruction_text, essay.text, exemplars=chosen
    )
    index_of = {id(e): i for i, e in enumerate(essay_set.exemplars)}
    meta = PromptMeta(
        pattern=pattern.kind,
        instruction=instruction.kind,
        paraphrase_index=instruction.paraphrase_index,
        shot_mode=shot_mode,
        exemplar_indices=tuple(index_of[id(e)] for e in chosen),
        set_id=essay_set.set_id,
        essay_id=essay.essay_id,
        character_count=len(text),
    )
    return AssembledPrompt(text=text, meta=meta)

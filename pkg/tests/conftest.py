from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Callable

import httpx
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from promptgrade.corpus import (
    Corpus,
    Essay,
    EssaySet,
    Exemplar,
    RubricLevel,
    ScoreRange,
    assign_folds,
)

# The worked rubric example for a 0-3 reading-comprehension set; doubles as
# substantive rendering input in the prompting tests.
COMPREHENSION_RUBRIC = (
    RubricLevel(
        score=3,
        description="The response demonstrates an understanding of the complexities of the text.",
        bullets=(
            "Addresses the demands of the question",
            "Uses expressed and implied information from the text",
            "Clarifies and extends understanding beyond the literal",
        ),
    ),
    RubricLevel(
        score=2,
        description="The response demonstrates a partial or literal understanding of the text.",
        bullets=(
            "Addresses the demands of the question, although may not develop all parts equally",
            "Uses some expressed or implied information from the text to demonstrate understanding",
            "May not fully connect the support to a conclusion or assertion made about the text(s)",
        ),
    ),
    RubricLevel(
        score=1,
        description="The response shows evidence of a minimal understanding of the text.",
        bullets=(
            "May show evidence that some meaning has been derived from the text",
            "May indicate a misreading of the text or the question",
            "May lack information or explanation to support an understanding of the text in relation to the question",
        ),
    ),
    RubricLevel(
        score=0,
        description="The response is completely irrelevant or incorrect, or there is no response.",
        bullets=(),
    ),
)

GOLDEN_ESSAY_PROMPT = (
    "Explain how the author of the passage shows determination. Support your "
    "answer with details from the passage."
)

GOLDEN_ESSAY_TEXT = (
    "The story shows that the author kept trying even when the work was hard. "
    "He practiced every day after school."
)

GOLDEN_EXEMPLAR = Exemplar(
    essay_text="The author wrote about a man who worked hard.",
    reasoning=(
        "The response shows a minimal understanding of the passage. It "
        "identifies the topic but gives no supporting details from the text."
    ),
    score=1,
)


@pytest.fixture
def golden_set() -> EssaySet:
    return EssaySet(
        set_id=3,
        essay_prompt=GOLDEN_ESSAY_PROMPT,
        score_range=ScoreRange(min=0, max=3),
        rubric=COMPREHENSION_RUBRIC,
        exemplars=(GOLDEN_EXEMPLAR,),
    )


@pytest.fixture
def golden_essay() -> Essay:
    return Essay(essay_id=42, set_id=3, text=GOLDEN_ESSAY_TEXT, gold_score=2)


def make_essay_set(
    set_id: int = 3,
    lo: int = 0,
    hi: int = 3,
    exemplars: tuple[Exemplar, ...] = (),
) -> EssaySet:
    """Minimal valid set with a one-level-per-score rubric."""
    return EssaySet(
        set_id=set_id,
        essay_prompt=f"Synthetic writing task for set {set_id}.",
        score_range=ScoreRange(min=lo, max=hi),
        rubric=tuple(
            RubricLevel(score=s, description=f"Work at level {s}.", bullets=())
            for s in range(hi, lo - 1, -1)
        ),
        exemplars=exemplars,
    )


def make_corpus(
    set_ids: tuple[int, ...] = (3,),
    essays_per_set: int = 10,
    fold_of: Callable[[int], int] = lambda i: 0,
    lo: int = 0,
    hi: int = 3,
    exemplars: tuple[Exemplar, ...] = (),
) -> Corpus:
    """Synthetic corpus; the i-th essay of each set goes to fold fold_of(i)."""
    sets = {sid: make_essay_set(sid, lo, hi, exemplars) for sid in set_ids}
    essays = []
    for sid in set_ids:
        for i in range(essays_per_set):
            essays.append(
                Essay(
                    essay_id=sid * 1000 + i,
                    set_id=sid,
                    text=f"Synthetic essay {i} for set {sid}. It has a few sentences.",
                    gold_score=lo + i % (hi - lo + 1),
                )
            )
    fold_map = {e.essay_id: fold_of(e.essay_id % 1000) for e in essays}
    folds = assign_folds(essays, fold_map)
    return Corpus(sets=sets, essays=tuple(essays), folds=tuple(folds))


def make_study(n_items: int = 24, n_groups: int = 4, n_annotators: int = 12):
    """Synthetic annotation study cycling items over the three study strategies."""
    from promptgrade.annotation import AnnotationItem, AnnotationStudy, assign_groups
    from promptgrade.templates import InstructionKind

    strategies = (
        InstructionKind.FEEDBACK,
        InstructionKind.FEEDBACK_THEN_SCORING,
        InstructionKind.FEEDBACK_DCOT_THEN_SCORING,
    )
    items = [
        AnnotationItem(
            item_id=f"item-{i:02d}",
            essay_prompt="Explain the ending of the story.",
            essay=f"Student essay number {i} about the ending.",
            feedback=f"Feedback {i}: cite the passage and explain the symbol.",
            source_strategy=strategies[i % 3],
            source_run=f"run-{i:02d}",
        )
        for i in range(n_items)
    ]
    annotators = [f"ann-{j:02d}" for j in range(1, n_annotators + 1)]
    groups = assign_groups(items, annotators, n_groups)
    return AnnotationStudy(items=tuple(items), groups=tuple(groups))


def scripted_transport(
    reply: Callable[[str], str],
    calls: list | None = None,
) -> httpx.MockTransport:
    """OpenAI-shaped mock endpoint; reply maps the prompt to the completion."""

    def handler(request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content.decode("utf-8"))
        if calls is not None:
            calls.append(payload)
        text = reply(payload["messages"][0]["content"])
        return httpx.Response(
            200,
            json={
                "choices": [
                    {"message": {"role": "assistant", "content": text}, "finish_reason": "stop"}
                ]
            },
        )

    return httpx.MockTransport(handler)

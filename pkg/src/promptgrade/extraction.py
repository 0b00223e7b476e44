"""Score and feedback extraction from free-form model output.

Models are instructed to emit the score as JSON, but in practice responses mix
prose, markdown fences, exemplar-style score blocks, and reasoning. Extraction
is tiered:

1. the last well-formed JSON object that carries a numeric score field,
2. an exemplar-style ``Scores: {Overall: N}`` block (not valid JSON),
3. otherwise the response counts as unscored.

Out-of-range numbers are classified unscored, never clamped. A single
re-prompt round can rescue responses that mention the score only in prose.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Callable

from .corpus import ScoreRange

# Keys accepted as "the score" inside a JSON object, in priority order.
SCORE_KEYS = ("score", "overall", "grade", "helpfulness", "final_score", "essay_score")

_OVERALL_BLOCK_RE = re.compile(
    r"Scores?\s*:\s*\{\s*Overall\s*:\s*(-?\d+(?:\.\d+)?)\s*\}", re.IGNORECASE
)

REPROMPT_TEMPLATE = (
    "You are given a response from an essay grading assistant.\n"
    '#### Response: "{response}"\n'
    "Extract the numeric essay score from the response above. Answer with a "
    'single JSON object of the form {{"score": <number>}} and nothing else. '
    'If the response contains no score, answer {{"score": null}}.'
)


@dataclass(frozen=True)
class ScoreExtraction:
    """Outcome of score extraction; method records which tier produced it."""

    score: int | None
    method: str  # json | pattern | reprompt | unscored
    raw_span: str = ""

    def __post_init__(self) -> None:
        if (self.method == "unscored") != (self.score is None):
            raise ValueError("method=unscored exactly when score is absent")

    @property
    def scored(self) -> bool:
        return self.score is not None


@dataclass(frozen=True)
class FeedbackText:
    """Response body with the score block removed."""

    text: str
    source_run: str = ""

    @property
    def is_empty(self) -> bool:
        return not self.text


def round_half_away_from_zero(value: float) -> int:
    if value >= 0:
        return math.floor(value + 0.5)
    return math.ceil(value - 0.5)


def _scan_json_objects(text: str) -> list[tuple[int, int, dict]]:
    """Non-overlapping JSON objects in order of appearance, with spans."""
    decoder = json.JSONDecoder()
    objects: list[tuple[int, int, dict]] = []
    pos = 0
    while True:
        start = text.find("{", pos)
        if start == -1:
            break
        try:
            obj, end = decoder.raw_decode(text[start:])
        except json.JSONDecodeError:
            pos = start + 1
            continue
        if isinstance(obj, dict):
            objects.append((start, start + end, obj))
            pos = start + end
        else:
            pos = start + 1
    return objects


def _numeric_score_field(obj: dict) -> float | None:
    """Depth-first search for a score-like key with a numeric value."""
    for key in SCORE_KEYS:
        value = _lookup(obj, key)
        if value is not None:
            return value
    return None


def _lookup(obj: dict, key: str) -> float | None:
    for k, v in obj.items():
        if isinstance(k, str) and k.lower() == key:
            num = _as_number(v)
            if num is not None:
                return num
    for v in obj.values():
        if isinstance(v, dict):
            found = _lookup(v, key)
            if found is not None:
                return found
    return None


def _as_number(value: object) -> float | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value.strip())
        except ValueError:
            return None
    return None


def extract_score(response_text: str, score_range: ScoreRange) -> ScoreExtraction:
    """Extract an in-range integer score, or classify the response unscored."""
    # Tier 1: last JSON object carrying a numeric score field.
    candidates = [
        (start, end, value)
        for start, end, obj in _scan_json_objects(response_text)
        if (value := _numeric_score_field(obj)) is not None
    ]
    if candidates:
        start, end, value = candidates[-1]
        span = response_text[start:end]
        score = round_half_away_from_zero(value)
        if score_range.contains(score):
            return ScoreExtraction(score=score, method="json", raw_span=span)
        return ScoreExtraction(score=None, method="unscored", raw_span=span)

    # Tier 2: exemplar-style Scores: {Overall: N} block.
    matches = list(_OVERALL_BLOCK_RE.finditer(response_text))
    if matches:
        match = matches[-1]
        score = round_half_away_from_zero(float(match.group(1)))
        if score_range.contains(score):
            return ScoreExtraction(score=score, method="pattern", raw_span=match.group(0))
        return ScoreExtraction(score=None, method="unscored", raw_span=match.group(0))

    return ScoreExtraction(score=None, method="unscored")


def build_reprompt(prior_response: str) -> str:
    """Prompt asking the model to pull the score out of its own prior answer."""
    return REPROMPT_TEMPLATE.replace("{response}", prior_response)


def resolve_score(
    response_text: str,
    score_range: ScoreRange,
    complete_fn: Callable[[str], str] | None = None,
) -> ScoreExtraction:
    """extract_score plus at most one re-prompt round via `complete_fn`.

    A score rescued by the re-prompt is reported with method="reprompt"; a
    second miss is final unscored.
    """
    extraction = extract_score(response_text, score_range)
    if extraction.scored or complete_fn is None:
        return extraction
    retry_text = complete_fn(build_reprompt(response_text))
    retry = extract_score(retry_text, score_range)
    if retry.scored:
        return ScoreExtraction(score=retry.score, method="reprompt", raw_span=retry.raw_span)
    return extraction


def split_feedback(
    response_text: str, extraction: ScoreExtraction, source_run: str = ""
) -> FeedbackText:
    """Remove the extracted score block and trim; remainder is the feedback."""
    text = response_text
    if extraction.raw_span:
        cut = text.rfind(extraction.raw_span)
        if cut != -1:
            text = text[:cut] + text[cut + len(extraction.raw_span):]
    return FeedbackText(text=text.strip(), source_run=source_run)

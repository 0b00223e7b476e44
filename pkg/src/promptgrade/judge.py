"""LLM-as-judge helpfulness scoring of generated essay feedback.

A judge model reads the student essay and the generated feedback and assigns
an overall helpfulness score from 1 (not helpful) to 10 (very helpful). The
judge may be the same model that produced the feedback; reports can flag
self-judging via the recorded judge_model.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import httpx

from .corpus import ScoreRange
from .extraction import resolve_score
from .llm_client import EndpointConfig, GenerationRequest, ResponseCache, complete, complete_cached
from .metrics import mean_std

logger = logging.getLogger(__name__)

HELPFULNESS_RANGE = ScoreRange(min=1, max=10)

JUDGE_TEMPLATE = (
    "You are given an essay and feedback from a teacher for this essay. "
    "Your task is to evaluate the helpfulness of the feedback.\n"
    "\n"
    '#### Essay: "{essay}"\n'
    "\n"
    '#### Feedback: "{feedback}"\n'
    "\n"
    "# Task:\n"
    "Evaluate the helpfulness of the feedback. Helpful feedback should explain "
    "what the errors are, why they are errors, and how to fix them. Give a "
    "score between 1 and 10, where 1 means the feedback is not helpful at all, "
    "and 10 means the feedback is very helpful.\n"
    "\n"
    "Provide the output in the following output:\n"
    "{format_instructions}"
)

FORMAT_INSTRUCTIONS = (
    'Answer with a single JSON object of the form {"helpfulness": <integer '
    "between 1 and 10>} and nothing else."
)


class JudgmentError(Exception):
    """No in-range helpfulness score could be extracted for an item."""


@dataclass(frozen=True)
class HelpfulnessJudgment:
    item: str
    judge_model: str
    score: int
    raw_response: str = ""

    def __post_init__(self) -> None:
        if not HELPFULNESS_RANGE.contains(self.score):
            raise ValueError(f"helpfulness score must be 1-10, got {self.score}")


def build_judge_prompt(essay: str, feedback: str) -> str:
    """Judge prompt with the essay and feedback quoted in place."""
    if not feedback.strip():
        raise JudgmentError("cannot judge empty feedback")
    text = JUDGE_TEMPLATE.replace("{essay}", essay)
    text = text.replace("{feedback}", feedback)
    return text.replace("{format_instructions}", FORMAT_INSTRUCTIONS)


def judge(
    essay: str,
    feedback: str,
    cfg: EndpointConfig,
    *,
    item: str = "",
    cache: ResponseCache | None = None,
    transport: httpx.BaseTransport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> HelpfulnessJudgment:
    """Score one feedback text; one re-prompt round, then a judgment error."""

    def call(prompt: str) -> str:
        req = GenerationRequest(prompt=prompt)
        if cache is not None:
            return complete_cached(cfg, req, cache, transport=transport, sleep=sleep).text
        return complete(cfg, req, transport=transport, sleep=sleep).text

    response_text = call(build_judge_prompt(essay, feedback))
    extraction = resolve_score(response_text, HELPFULNESS_RANGE, complete_fn=call)
    if not extraction.scored:
        raise JudgmentError(f"item {item or '<unnamed>'}: no in-range helpfulness score")
    return HelpfulnessJudgment(
        item=item,
        judge_model=cfg.model_name,
        score=extraction.score,
        raw_response=response_text,
    )


@dataclass(frozen=True)
class HelpfulnessStat:
    facet: str
    mean: float
    std: float
    n: int


def aggregate_helpfulness(groups: Mapping[str, Sequence[int]]) -> list[HelpfulnessStat]:
    """Mean/std/count per facet group; empty groups are dropped with a warning."""
    stats: list[HelpfulnessStat] = []
    for facet, scores in groups.items():
        if not scores:
            logger.warning("facet %r has no judgments; omitting row", facet)
            continue
        mean, std = mean_std(list(scores))
        stats.append(HelpfulnessStat(facet=facet, mean=mean, std=std, n=len(scores)))
    return stats


def write_judgments(path: str | Path, judgments: Sequence[HelpfulnessJudgment]) -> None:
    """Append judgments as line-delimited records with a timestamp."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        for j in judgments:
            record = {
                "item": j.item,
                "judge_model": j.judge_model,
                "score": j.score,
                "timestamp": time.time(),
                "raw_response": j.raw_response,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_judgments(path: str | Path) -> list[HelpfulnessJudgment]:
    judgments = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            judgments.append(
                HelpfulnessJudgment(
                    item=record["item"],
                    judge_model=record["judge_model"],
                    score=int(record["score"]),
                    raw_response=record.get("raw_response", ""),
                )
            )
    return judgments

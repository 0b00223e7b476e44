"""Grid orchestration: run every (strategy, essay) pair, then build QWK tables.

Strategy selection is validation-driven: dev-split records pick the best
(pattern, paraphrase) combination, test-split records report it. Records are
tagged with their split role and the two never mix inside a computation.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import httpx

from .corpus import Corpus, Essay, ScoreRange
from .extraction import (
    FeedbackText,
    ScoreExtraction,
    build_reprompt,
    extract_score,
    split_feedback,
)
from .llm_client import (
    ConfigurationError,
    ContextOverflowError,
    EndpointConfig,
    EndpointError,
    GenerationRequest,
    ResponseCache,
    complete_cached,
)
from .metrics import RatingVector, qwk
from .prompting import assemble
from .templates import InstructionKind, PatternKind, ShotMode, template_catalog

logger = logging.getLogger(__name__)

SPLIT_ROLES = ("dev", "test")


class ExperimentError(Exception):
    """Plan or record-set precondition violation."""


class StrategyKey(NamedTuple):
    pattern: PatternKind
    instruction: InstructionKind
    paraphrase_index: int
    shot_mode: ShotMode

    @property
    def sort_key(self) -> tuple[int, int, int, int]:
        return (
            self.pattern.order,
            self.instruction.order,
            self.paraphrase_index,
            list(ShotMode).index(self.shot_mode),
        )


@dataclass(frozen=True)
class ExperimentPlan:
    """The grid to run: strategy subsets, data subsets, endpoint, seed."""

    patterns: tuple[PatternKind, ...]
    instruction_types: tuple[InstructionKind, ...]
    paraphrases: tuple[int, ...]
    shot_modes: tuple[ShotMode, ...]
    sets: tuple[int, ...]
    folds: tuple[int, ...]
    endpoint: EndpointConfig
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("patterns", "instruction_types", "paraphrases", "shot_modes", "sets", "folds"):
            if not getattr(self, name):
                raise ExperimentError(f"plan.{name} must be non-empty")
        if not set(self.paraphrases) <= {1, 2, 3, 4}:
            raise ExperimentError(f"paraphrases must be within 1-4, got {self.paraphrases}")
        if not set(self.sets) <= set(range(1, 9)):
            raise ExperimentError(f"sets must be within 1-8, got {self.sets}")
        if not set(self.folds) <= set(range(5)):
            raise ExperimentError(f"folds must be within 0-4, got {self.folds}")
        object.__setattr__(self, "patterns", _canonical(self.patterns, list(PatternKind)))
        object.__setattr__(
            self, "instruction_types", _canonical(self.instruction_types, list(InstructionKind))
        )
        object.__setattr__(self, "paraphrases", tuple(sorted(set(self.paraphrases))))
        object.__setattr__(self, "shot_modes", _canonical(self.shot_modes, list(ShotMode)))
        object.__setattr__(self, "sets", tuple(sorted(set(self.sets))))
        object.__setattr__(self, "folds", tuple(sorted(set(self.folds))))

    def strategies(self) -> list[StrategyKey]:
        return [
            StrategyKey(p, i, n, s)
            for p in self.patterns
            for i in self.instruction_types
            for n in self.paraphrases
            for s in self.shot_modes
        ]


def _canonical(values, ordering):
    unique = set(values)
    return tuple(v for v in ordering if v in unique)


@dataclass(frozen=True)
class RunRecord:
    """One generation for one (strategy, essay) pair."""

    pattern: PatternKind
    instruction: InstructionKind
    paraphrase_index: int
    shot_mode: ShotMode
    set_id: int
    fold: int
    split_role: str
    essay_id: int
    prompt_digest: str
    response_text: str
    extraction: ScoreExtraction
    feedback: FeedbackText
    latency_ms: int
    cached: bool

    @property
    def strategy(self) -> StrategyKey:
        return StrategyKey(self.pattern, self.instruction, self.paraphrase_index, self.shot_mode)

    @property
    def run_id(self) -> str:
        return (
            f"{self.pattern.value}|{self.instruction.value}|p{self.paraphrase_index}"
            f"|{self.shot_mode.value}|s{self.set_id}|f{self.fold}|{self.split_role}"
            f"|e{self.essay_id}"
        )

    def to_json(self) -> dict:
        return {
            "pattern": self.pattern.value,
            "instruction": self.instruction.value,
            "paraphrase_index": self.paraphrase_index,
            "shot_mode": self.shot_mode.value,
            "set_id": self.set_id,
            "fold": self.fold,
            "split_role": self.split_role,
            "essay_id": self.essay_id,
            "prompt_digest": self.prompt_digest,
            "response_text": self.response_text,
            "extraction": {
                "score": self.extraction.score,
                "method": self.extraction.method,
                "raw_span": self.extraction.raw_span,
            },
            "feedback": self.feedback.text,
            "latency_ms": self.latency_ms,
            "cached": self.cached,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "RunRecord":
        extraction = ScoreExtraction(
            score=data["extraction"]["score"],
            method=data["extraction"]["method"],
            raw_span=data["extraction"].get("raw_span", ""),
        )
        record = cls(
            pattern=PatternKind(data["pattern"]),
            instruction=InstructionKind(data["instruction"]),
            paraphrase_index=int(data["paraphrase_index"]),
            shot_mode=ShotMode(data["shot_mode"]),
            set_id=int(data["set_id"]),
            fold=int(data["fold"]),
            split_role=data["split_role"],
            essay_id=int(data["essay_id"]),
            prompt_digest=data["prompt_digest"],
            response_text=data["response_text"],
            extraction=extraction,
            feedback=FeedbackText(text=data["feedback"]),
            latency_ms=int(data["latency_ms"]),
            cached=bool(data["cached"]),
        )
        return replace(record, feedback=FeedbackText(text=data["feedback"], source_run=record.run_id))


def write_records(path: str | Path, records: Sequence[RunRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")


def read_records(path: str | Path) -> list[RunRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(RunRecord.from_json(json.loads(line)))
    return records


def run_seed(plan_seed: int, strategy: StrategyKey, essay_id: int) -> int:
    """Stable per-run rng seed; identical plans replay identical selections."""
    material = (
        f"{plan_seed}|{strategy.pattern.value}|{strategy.instruction.value}"
        f"|{strategy.paraphrase_index}|{strategy.shot_mode.value}|{essay_id}"
    )
    return int.from_bytes(hashlib.sha256(material.encode("utf-8")).digest()[:8], "big")


def run_grid(
    plan: ExperimentPlan,
    split_role: str,
    corpus: Corpus,
    cache: ResponseCache,
    *,
    transport: httpx.BaseTransport | None = None,
    workers: int = 1,
    on_failure: Callable[[dict, Exception], None] | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> list[RunRecord]:
    """One RunRecord per (strategy, essay) on the chosen split of each fold.

    Endpoint failures are logged (and passed to `on_failure`) without aborting
    the grid; unscored extractions are normal records. Responses come from the
    cache when warm, so reruns are cheap and make no network calls.
    """
    if split_role not in SPLIT_ROLES:
        raise ExperimentError(f"split_role must be one of {SPLIT_ROLES}, got {split_role!r}")
    catalog = template_catalog()
    jobs: list[tuple[StrategyKey, int, Essay]] = []
    for strategy in plan.strategies():
        for fold in plan.folds:
            for essay in sorted(
                corpus.split_essays(plan.sets, fold, split_role), key=lambda e: e.essay_id
            ):
                jobs.append((strategy, fold, essay))

    def execute(job: tuple[StrategyKey, int, Essay]) -> RunRecord | None:
        strategy, fold, essay = job
        coords = {
            "pattern": strategy.pattern.value,
            "instruction": strategy.instruction.value,
            "paraphrase_index": strategy.paraphrase_index,
            "shot_mode": strategy.shot_mode.value,
            "set_id": essay.set_id,
            "fold": fold,
            "split_role": split_role,
            "essay_id": essay.essay_id,
        }
        try:
            return _run_one(plan, strategy, fold, split_role, essay, corpus, cache, catalog,
                            transport=transport, sleep=sleep)
        except (EndpointError, ConfigurationError, ContextOverflowError) as exc:
            logger.warning("run failed %s: %s", coords, exc)
            if on_failure is not None:
                on_failure(coords, exc)
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(execute, jobs))
    else:
        results = [execute(job) for job in jobs]
    return [record for record in results if record is not None]


def _run_one(
    plan: ExperimentPlan,
    strategy: StrategyKey,
    fold: int,
    split_role: str,
    essay: Essay,
    corpus: Corpus,
    cache: ResponseCache,
    catalog,
    *,
    transport,
    sleep,
) -> RunRecord:
    essay_set = corpus.sets[essay.set_id]
    rng = random.Random(run_seed(plan.seed, strategy, essay.essay_id))
    prompt = assemble(
        catalog.pattern(strategy.pattern),
        catalog.instruction(strategy.instruction, strategy.paraphrase_index),
        strategy.shot_mode,
        essay_set,
        essay,
        rng,
    )
    response = complete_cached(
        plan.endpoint, GenerationRequest(prompt=prompt.text), cache,
        transport=transport, sleep=sleep,
    )
    latency_ms = response.latency_ms
    all_cached = response.cached

    primary = extract_score(response.text, essay_set.score_range)
    final = primary
    if not primary.scored:
        retry_response = complete_cached(
            plan.endpoint, GenerationRequest(prompt=build_reprompt(response.text)), cache,
            transport=transport, sleep=sleep,
        )
        latency_ms += retry_response.latency_ms
        all_cached = all_cached and retry_response.cached
        retry = extract_score(retry_response.text, essay_set.score_range)
        if retry.scored:
            final = ScoreExtraction(score=retry.score, method="reprompt", raw_span=retry.raw_span)

    record = RunRecord(
        pattern=strategy.pattern,
        instruction=strategy.instruction,
        paraphrase_index=strategy.paraphrase_index,
        shot_mode=strategy.shot_mode,
        set_id=essay.set_id,
        fold=fold,
        split_role=split_role,
        essay_id=essay.essay_id,
        prompt_digest=hashlib.sha256(prompt.text.encode("utf-8")).hexdigest(),
        response_text=response.text,
        extraction=final,
        feedback=FeedbackText(text="", source_run=""),
        latency_ms=latency_ms,
        cached=all_cached,
    )
    # Feedback splitting uses the span found in the original response, not the
    # re-prompt round, so the student-visible text stays faithful.
    feedback = split_feedback(response.text, primary, source_run=record.run_id)
    return replace(record, feedback=feedback)


def cell_qwk(
    records: Iterable[RunRecord], gold: Mapping[int, int], score_range: ScoreRange
) -> float | None:
    """QWK of extracted vs gold scores over the scored records; None if < 2."""
    pairs = [(gold[r.essay_id], r.extraction.score) for r in records if r.extraction.scored]
    if len(pairs) < 2:
        return None
    lo, hi = score_range.min, score_range.max
    return qwk(
        RatingVector(tuple(g for g, _ in pairs), lo, hi),
        RatingVector(tuple(p for _, p in pairs), lo, hi),
    )


def _mean_dev_qwk(
    records: Sequence[RunRecord], gold: Mapping[int, int], ranges: Mapping[int, ScoreRange]
) -> float | None:
    values = []
    for set_id in sorted({r.set_id for r in records}):
        value = cell_qwk([r for r in records if r.set_id == set_id], gold, ranges[set_id])
        if value is not None:
            values.append(value)
    if not values:
        return None
    return sum(values) / len(values)


def _best_strategy(
    dev_records: Sequence[RunRecord],
    gold: Mapping[int, int],
    ranges: Mapping[int, ScoreRange],
) -> StrategyKey:
    """Argmax of mean dev QWK over the distinct strategies present.

    Ties break lexicographically: pattern order, instruction order, paraphrase
    index, shot mode; deterministic by construction.
    """
    if not dev_records:
        raise ExperimentError("no dev records to select from")
    by_strategy: dict[StrategyKey, list[RunRecord]] = {}
    for record in dev_records:
        by_strategy.setdefault(record.strategy, []).append(record)
    scored = [
        (strategy, value)
        for strategy, group in by_strategy.items()
        if (value := _mean_dev_qwk(group, gold, ranges)) is not None
    ]
    if not scored:
        raise ExperimentError("no evaluable dev records (need >= 2 scored essays per set)")
    best_value = max(value for _, value in scored)
    tied = [strategy for strategy, value in scored if value == best_value]
    return min(tied, key=lambda s: s.sort_key)


def select_best_on_dev(
    records: Sequence[RunRecord],
    row_key: InstructionKind,
    gold: Mapping[int, int],
    ranges: Mapping[int, ScoreRange],
) -> tuple[PatternKind, int]:
    """Best (pattern, paraphrase) for an instruction type by dev-split QWK.

    Only dev-tagged records are read; test-tagged records are filtered out on
    the split tag before any content access.
    """
    dev_records = [r for r in records if r.split_role == "dev"]
    row_records = [r for r in dev_records if r.instruction == row_key]
    best = _best_strategy(row_records, gold, ranges)
    return best.pattern, best.paraphrase_index

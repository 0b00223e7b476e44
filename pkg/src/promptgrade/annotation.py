"""Human helpfulness study: item sampling, annotator groups, and analysis.

Annotators see the essay prompt, the student essay, and the generated
feedback, and rate five statements on a 7-point Likert scale. Which strategy
produced each feedback stays hidden from annotators (blindness) and is only
re-attached in the export used for analysis.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Corpus
from .experiment import ExperimentError, RunRecord, select_best_on_dev
from .judge import HelpfulnessJudgment
from .metrics import (
    ReliabilityMatrix,
    UndefinedCorrelationError,
    krippendorff_alpha_interval,
    pearson,
)
from .templates import InstructionKind

LIKERT_MIN = 1
LIKERT_MAX = 7
STATEMENT_KEYS = ("s1", "s2", "s3", "s4", "s5")

STATEMENTS = {
    "s1": "The feedback clearly points out mistakes that were made in the essay.",
    "s2": "The feedback explains exactly why the errors are errors.",
    "s3": "The feedback is very clear and precise so that the student can understand it.",
    "s4": "The feedback is absolutely suitable for students from 7th to 10th grade.",
    "s5": "Overall, the feedback is very helpful.",
}

SCALE_LABELS = {LIKERT_MIN: "I strongly disagree", LIKERT_MAX: "I fully agree"}

DEFAULT_STUDY_STRATEGIES = (
    InstructionKind.FEEDBACK,
    InstructionKind.FEEDBACK_THEN_SCORING,
    InstructionKind.FEEDBACK_DCOT_THEN_SCORING,
)
DEFAULT_STUDY_SET = 4
DEFAULT_STUDY_SIZE = 24
N_GROUPS = 4


class AnnotationError(Exception):
    """Study construction or analysis precondition violation."""


@dataclass(frozen=True)
class AnnotationItem:
    item_id: str
    essay_prompt: str
    essay: str
    feedback: str
    source_strategy: InstructionKind  # never sent to annotators
    source_run: str


@dataclass(frozen=True)
class AnnotatorGroup:
    group_id: int
    annotator_ids: tuple[str, ...]
    item_ids: tuple[str, ...]


@dataclass(frozen=True)
class AnnotationRecord:
    annotator_id: str
    item_id: str
    s1: int
    s2: int
    s3: int
    s4: int
    s5: int
    submitted_at: float

    def __post_init__(self) -> None:
        for key in STATEMENT_KEYS:
            value = getattr(self, key)
            if not LIKERT_MIN <= value <= LIKERT_MAX:
                raise AnnotationError(
                    f"{key} must be {LIKERT_MIN}-{LIKERT_MAX}, got {value}"
                )

    def statement(self, key: str) -> int:
        if key not in STATEMENT_KEYS:
            raise AnnotationError(f"unknown statement {key!r}")
        return getattr(self, key)


def sample_annotation_items(
    records: Sequence[RunRecord],
    corpus: Corpus,
    rng: random.Random,
    *,
    set_id: int = DEFAULT_STUDY_SET,
    n: int = DEFAULT_STUDY_SIZE,
    strategies: Sequence[InstructionKind] = DEFAULT_STUDY_STRATEGIES,
) -> list[AnnotationItem]:
    """Sample n feedback texts from one essay set, evenly over the strategies.

    Per strategy, candidates are the test-split records of the (pattern,
    paraphrase) combination that performed best on the dev split, restricted
    to non-empty feedback. Deterministic given the rng seed.
    """
    if n % len(strategies) != 0:
        raise AnnotationError(
            f"n={n} does not divide evenly over {len(strategies)} strategies"
        )
    per_stratum = n // len(strategies)
    gold = corpus.gold_by_id()
    ranges = corpus.ranges_by_set()

    items: list[AnnotationItem] = []
    shortfalls: list[str] = []
    for strategy in strategies:
        try:
            pattern, paraphrase = select_best_on_dev(records, strategy, gold, ranges)
        except ExperimentError:
            # Feedback-only strategies produce no scores, so no dev QWK exists;
            # fall back to the canonically first combination with usable feedback.
            combos = sorted(
                {
                    (r.pattern, r.paraphrase_index)
                    for r in records
                    if r.instruction == strategy and not r.feedback.is_empty
                },
                key=lambda c: (c[0].order, c[1]),
            )
            if not combos:
                shortfalls.append(f"{strategy.label}: no candidate records")
                continue
            pattern, paraphrase = combos[0]
        candidates = [
            r
            for r in records
            if r.split_role == "test"
            and r.instruction == strategy
            and r.set_id == set_id
            and r.pattern == pattern
            and r.paraphrase_index == paraphrase
            and not r.feedback.is_empty
        ]
        candidates.sort(key=lambda r: r.run_id)
        if len(candidates) < per_stratum:
            shortfalls.append(
                f"{strategy.label}: need {per_stratum}, have {len(candidates)}"
            )
            continue
        chosen = rng.sample(candidates, per_stratum)
        for record in chosen:
            essay = corpus.essay(record.essay_id)
            items.append(
                AnnotationItem(
                    item_id=f"item-{strategy.value}-{record.essay_id}",
                    essay_prompt=corpus.sets[record.set_id].essay_prompt,
                    essay=essay.text,
                    feedback=record.feedback.text,
                    source_strategy=strategy,
                    source_run=record.run_id,
                )
            )
    if shortfalls:
        raise AnnotationError("not enough candidate feedbacks: " + "; ".join(shortfalls))
    return items


def assign_groups(
    items: Sequence[AnnotationItem],
    annotator_ids: Sequence[str],
    n_groups: int = N_GROUPS,
) -> list[AnnotatorGroup]:
    """Partition items into n_groups blocks; each block gets its annotators.

    Annotators within a group annotate the same items; groups cover disjoint
    item blocks.
    """
    if len(items) % n_groups != 0:
        raise AnnotationError(f"{len(items)} items do not split into {n_groups} groups")
    if len(annotator_ids) % n_groups != 0:
        raise AnnotationError(
            f"{len(annotator_ids)} annotators do not split into {n_groups} groups"
        )
    if len(set(annotator_ids)) != len(annotator_ids):
        raise AnnotationError("duplicate annotator ids")
    items_per_group = len(items) // n_groups
    annotators_per_group = len(annotator_ids) // n_groups
    groups = []
    for g in range(n_groups):
        groups.append(
            AnnotatorGroup(
                group_id=g + 1,
                annotator_ids=tuple(
                    annotator_ids[g * annotators_per_group : (g + 1) * annotators_per_group]
                ),
                item_ids=tuple(
                    item.item_id
                    for item in items[g * items_per_group : (g + 1) * items_per_group]
                ),
            )
        )
    return groups


@dataclass(frozen=True)
class AnnotationStudy:
    """Immutable study definition consumed by the annotation service."""

    items: tuple[AnnotationItem, ...]
    groups: tuple[AnnotatorGroup, ...]

    def __post_init__(self) -> None:
        item_ids = [item.item_id for item in self.items]
        if len(set(item_ids)) != len(item_ids):
            raise AnnotationError("duplicate item ids")
        known = set(item_ids)
        for group in self.groups:
            for item_id in group.item_ids:
                if item_id not in known:
                    raise AnnotationError(f"group {group.group_id} references unknown {item_id}")

    def item(self, item_id: str) -> AnnotationItem:
        for item in self.items:
            if item.item_id == item_id:
                return item
        raise AnnotationError(f"unknown item {item_id!r}")

    def group_of(self, annotator_id: str) -> AnnotatorGroup | None:
        for group in self.groups:
            if annotator_id in group.annotator_ids:
                return group
        return None

    def item_strategies(self) -> dict[str, str]:
        return {item.item_id: item.source_strategy.value for item in self.items}

    def to_json(self) -> dict:
        return {
            "items": [
                {
                    "item_id": i.item_id,
                    "essay_prompt": i.essay_prompt,
                    "essay": i.essay,
                    "feedback": i.feedback,
                    "source_strategy": i.source_strategy.value,
                    "source_run": i.source_run,
                }
                for i in self.items
            ],
            "groups": [
                {
                    "group_id": g.group_id,
                    "annotator_ids": list(g.annotator_ids),
                    "item_ids": list(g.item_ids),
                }
                for g in self.groups
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "AnnotationStudy":
        items = tuple(
            AnnotationItem(
                item_id=i["item_id"],
                essay_prompt=i["essay_prompt"],
                essay=i["essay"],
                feedback=i["feedback"],
                source_strategy=InstructionKind(i["source_strategy"]),
                source_run=i["source_run"],
            )
            for i in data["items"]
        )
        groups = tuple(
            AnnotatorGroup(
                group_id=int(g["group_id"]),
                annotator_ids=tuple(g["annotator_ids"]),
                item_ids=tuple(g["item_ids"]),
            )
            for g in data["groups"]
        )
        return cls(items=items, groups=groups)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "AnnotationStudy":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


class AnnotationStore:
    """Append-only judgment log; last write per (annotator, item) wins.

    Every accepted submission is appended to the audit log (and the JSONL
    file, when given), so corrections stay visible.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._history: list[AnnotationRecord] = []
        if self.path is not None and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._history.append(_record_from_json(json.loads(line)))

    def add(self, record: AnnotationRecord) -> None:
        with self._lock:
            self._history.append(record)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(_record_to_json(record), ensure_ascii=False) + "\n")

    def history(self) -> list[AnnotationRecord]:
        with self._lock:
            return list(self._history)

    def latest(self) -> list[AnnotationRecord]:
        """One record per (annotator, item): the most recent submission."""
        with self._lock:
            current: dict[tuple[str, str], AnnotationRecord] = {}
            for record in self._history:
                current[(record.annotator_id, record.item_id)] = record
            return list(current.values())


def _record_to_json(record: AnnotationRecord) -> dict:
    return {
        "annotator_id": record.annotator_id,
        "item_id": record.item_id,
        **{key: getattr(record, key) for key in STATEMENT_KEYS},
        "submitted_at": record.submitted_at,
    }


def _record_from_json(data: Mapping) -> AnnotationRecord:
    return AnnotationRecord(
        annotator_id=data["annotator_id"],
        item_id=data["item_id"],
        s1=int(data["s1"]),
        s2=int(data["s2"]),
        s3=int(data["s3"]),
        s4=int(data["s4"]),
        s5=int(data["s5"]),
        submitted_at=float(data["submitted_at"]),
    )


@dataclass(frozen=True)
class AnnotationExport:
    """Everything analysis needs: latest records plus the unblinded item map."""

    records: tuple[AnnotationRecord, ...]
    item_strategies: Mapping[str, str]
    item_runs: Mapping[str, str]
    groups: tuple[AnnotatorGroup, ...]

    def to_json(self) -> dict:
        return {
            "records": [_record_to_json(r) for r in self.records],
            "item_strategies": dict(self.item_strategies),
            "item_runs": dict(self.item_runs),
            "groups": [
                {
                    "group_id": g.group_id,
                    "annotator_ids": list(g.annotator_ids),
                    "item_ids": list(g.item_ids),
                }
                for g in self.groups
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "AnnotationExport":
        return cls(
            records=tuple(_record_from_json(r) for r in data["records"]),
            item_strategies=dict(data["item_strategies"]),
            item_runs=dict(data["item_runs"]),
            groups=tuple(
                AnnotatorGroup(
                    group_id=int(g["group_id"]),
                    annotator_ids=tuple(g["annotator_ids"]),
                    item_ids=tuple(g["item_ids"]),
                )
                for g in data["groups"]
            ),
        )


def build_export(study: AnnotationStudy, store: AnnotationStore) -> AnnotationExport:
    return AnnotationExport(
        records=tuple(
            sorted(store.latest(), key=lambda r: (r.item_id, r.annotator_id))
        ),
        item_strategies=study.item_strategies(),
        item_runs={item.item_id: item.source_run for item in study.items},
        groups=study.groups,
    )


def manual_results_table(export: AnnotationExport) -> list[tuple[str, dict[str, float]]]:
    """Per-strategy mean of each statement over all annotators and items."""
    if not export.records:
        raise AnnotationError("export is empty")
    strategies = sorted(set(export.item_strategies.values()))
    rows = []
    for strategy in strategies:
        records = [
            r for r in export.records if export.item_strategies.get(r.item_id) == strategy
        ]
        if not records:
            continue
        means = {
            key: sum(r.statement(key) for r in records) / len(records)
            for key in STATEMENT_KEYS
        }
        rows.append((strategy, means))
    return rows


def correlate_manual_automatic(
    export: AnnotationExport,
    judgments: Sequence[HelpfulnessJudgment],
) -> dict[str, dict[str, float | None]]:
    """Pearson between per-item mean manual statement scores and automatic
    helpfulness scores, per judge model; None marks undefined cells."""
    item_ids = sorted({r.item_id for r in export.records})
    manual_means: dict[str, dict[str, float]] = {}
    for key in STATEMENT_KEYS:
        manual_means[key] = {}
        for item_id in item_ids:
            values = [r.statement(key) for r in export.records if r.item_id == item_id]
            manual_means[key][item_id] = sum(values) / len(values)

    run_to_item = {run: item_id for item_id, run in export.item_runs.items()}
    by_model: dict[str, dict[str, int]] = {}
    for judgment in judgments:
        item_id = run_to_item.get(judgment.item, judgment.item)
        by_model.setdefault(judgment.judge_model, {})[item_id] = judgment.score

    result: dict[str, dict[str, float | None]] = {}
    for model in sorted(by_model):
        scores = by_model[model]
        missing = [i for i in item_ids if i not in scores]
        if missing:
            raise AnnotationError(f"model {model!r} missing judgments for items {missing}")
        result[model] = {}
        for key in STATEMENT_KEYS:
            x = [manual_means[key][i] for i in item_ids]
            y = [float(scores[i]) for i in item_ids]
            try:
                result[model][key] = pearson(x, y)
            except UndefinedCorrelationError:
                result[model][key] = None
    return result


def group_alpha(
    export: AnnotationExport, statement: str = "s5"
) -> tuple[list[float], float]:
    """Interval Krippendorff's alpha per group on one statement, plus the mean.

    Groups with fewer than two annotators who submitted records are excluded.
    """
    if statement not in STATEMENT_KEYS:
        raise AnnotationError(f"unknown statement {statement!r}")
    by_pair = {(r.annotator_id, r.item_id): r for r in export.records}
    alphas: list[float] = []
    for group in export.groups:
        annotators = [
            a
            for a in group.annotator_ids
            if any((a, item_id) in by_pair for item_id in group.item_ids)
        ]
        if len(annotators) < 2:
            continue
        cells = tuple(
            tuple(
                float(by_pair[(a, item_id)].statement(statement))
                if (a, item_id) in by_pair
                else None
                for item_id in group.item_ids
            )
            for a in annotators
        )
        alphas.append(krippendorff_alpha_interval(ReliabilityMatrix(cells=cells)))
    if not alphas:
        raise AnnotationError("no group has >= 2 annotators with records")
    return alphas, sum(alphas) / len(alphas)


def make_record(
    annotator_id: str, item_id: str, answers: Mapping[str, int]
) -> AnnotationRecord:
    """Build a validated record from raw answers; timestamps on acceptance."""
    missing = [key for key in STATEMENT_KEYS if key not in answers]
    if missing:
        raise AnnotationError(f"missing statements: {missing}")
    return AnnotationRecord(
        annotator_id=annotator_id,
        item_id=item_id,
        s1=int(answers["s1"]),
        s2=int(answers["s2"]),
        s3=int(answers["s3"]),
        s4=int(answers["s4"]),
        s5=int(answers["s5"]),
        submitted_at=time.time(),
    )

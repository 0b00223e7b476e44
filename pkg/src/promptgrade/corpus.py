"""Essay corpus loading and validation.

Handles the three on-disk inputs: a tab-separated essay table, one structured
config file per essay set (writing prompt, score range, rubric, exemplar pool),
and a fold map assigning every essay to one cross-validation fold.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import yaml

N_FOLDS = 5

ESSAY_COLUMNS = ("essay_id", "essay_set", "essay")
GOLD_SCORE_COLUMNS = ("domain1_score", "score")


class CorpusError(Exception):
    """Raised for malformed corpus files or invariant violations."""


@dataclass(frozen=True)
class ScoreRange:
    min: int
    max: int

    def __post_init__(self) -> None:
        if self.min < 0 or self.max < 0:
            raise CorpusError(f"score range must be non-negative, got {self.min}..{self.max}")
        if self.min >= self.max:
            raise CorpusError(f"score range needs min < max, got {self.min}..{self.max}")

    def contains(self, score: int) -> bool:
        return self.min <= score <= self.max

    @property
    def medium(self) -> int:
        return math.floor((self.min + self.max) / 2)

    @property
    def categories(self) -> range:
        return range(self.min, self.max + 1)


@dataclass(frozen=True)
class RubricLevel:
    score: int
    description: str
    bullets: tuple[str, ...] = ()


@dataclass(frozen=True)
class Exemplar:
    """A scored example essay with a written justification for its score."""

    essay_text: str
    reasoning: str
    score: int


@dataclass(frozen=True)
class EssaySet:
    set_id: int
    essay_prompt: str
    score_range: ScoreRange
    rubric: tuple[RubricLevel, ...]
    exemplars: tuple[Exemplar, ...] = ()

    def __post_init__(self) -> None:
        if not 1 <= self.set_id <= 8:
            raise CorpusError(f"set_id must be 1-8, got {self.set_id}")
        if not self.rubric:
            raise CorpusError(f"set {self.set_id}: rubric must be non-empty")
        seen: set[int] = set()
        for level in self.rubric:
            if not self.score_range.contains(level.score):
                raise CorpusError(
                    f"set {self.set_id}: rubric level score {level.score} outside "
                    f"range {self.score_range.min}..{self.score_range.max}"
                )
            if level.score in seen:
                raise CorpusError(
                    f"set {self.set_id}: rubric covers score {level.score} twice"
                )
            seen.add(level.score)
        for ex in self.exemplars:
            if not self.score_range.contains(ex.score):
                raise CorpusError(
                    f"set {self.set_id}: exemplar score {ex.score} outside range"
                )


@dataclass(frozen=True)
class Essay:
    essay_id: int
    set_id: int
    text: str
    gold_score: int

    def __post_init__(self) -> None:
        if not self.text:
            raise CorpusError(f"essay {self.essay_id}: text must be non-empty")


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_ids: frozenset[int]
    dev_ids: frozenset[int]
    test_ids: frozenset[int]

    def __post_init__(self) -> None:
        if not 0 <= self.fold_index < N_FOLDS:
            raise CorpusError(f"fold_index must be 0-{N_FOLDS - 1}, got {self.fold_index}")
        if (
            self.train_ids & self.dev_ids
            or self.train_ids & self.test_ids
            or self.dev_ids & self.test_ids
        ):
            raise CorpusError(f"fold {self.fold_index}: train/dev/test overlap")

    def ids_for(self, role: str) -> frozenset[int]:
        if role == "train":
            return self.train_ids
        if role == "dev":
            return self.dev_ids
        if role == "test":
            return self.test_ids
        raise CorpusError(f"unknown split role {role!r}")


def load_essays(path: str | Path, sets: Mapping[int, EssaySet] | None = None) -> list[Essay]:
    """Read a tab-separated essay table.

    Requires columns essay_id, essay_set, essay, and a resolved gold score
    (domain1_score, or score as a fallback). When `sets` is given, every gold
    score is validated against its set's declared range.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError(f"{path}: empty file, expected a header row") from None
        columns = {name: i for i, name in enumerate(header)}
        for name in ESSAY_COLUMNS:
            if name not in columns:
                raise CorpusError(f"{path}: missing required column {name!r}")
        gold_col = next((c for c in GOLD_SCORE_COLUMNS if c in columns), None)
        if gold_col is None:
            raise CorpusError(
                f"{path}: missing resolved score column "
                f"(one of {', '.join(GOLD_SCORE_COLUMNS)})"
            )

        essays: list[Essay] = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell for cell in row):
                continue
            try:
                essay_id = int(row[columns["essay_id"]])
                set_id = int(row[columns["essay_set"]])
                gold = int(row[columns[gold_col]])
            except (ValueError, IndexError) as exc:
                raise CorpusError(f"{path}:{row_no}: malformed row: {exc}") from exc
            text = row[columns["essay"]]
            if sets is not None:
                if set_id not in sets:
                    raise CorpusError(
                        f"{path}:{row_no}: essay {essay_id} references unknown set {set_id}"
                    )
                if not sets[set_id].score_range.contains(gold):
                    rng = sets[set_id].score_range
                    raise CorpusError(
                        f"{path}:{row_no}: essay {essay_id} has score {gold} outside "
                        f"set {set_id} range {rng.min}..{rng.max}"
                    )
            essays.append(Essay(essay_id=essay_id, set_id=set_id, text=text, gold_score=gold))
    return essays


def load_set_config(path: str | Path) -> EssaySet:
    """Read one per-set YAML config (prompt, range, rubric, optional exemplars)."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise CorpusError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise CorpusError(f"{path}: expected a mapping at top level")

    try:
        rng = data["score_range"]
        score_range = ScoreRange(min=int(rng["min"]), max=int(rng["max"]))
        rubric = tuple(
            RubricLevel(
                score=int(level["score"]),
                description=str(level["description"]),
                bullets=tuple(str(b) for b in level.get("bullets", [])),
            )
            for level in data["rubric"]
        )
        exemplars = tuple(
            Exemplar(
                essay_text=str(ex["essay_text"]),
                reasoning=str(ex.get("reasoning", "")),
                score=int(ex["score"]),
            )
            for ex in data.get("exemplars", [])
        )
        return EssaySet(
            set_id=int(data["set_id"]),
            essay_prompt=str(data["essay_prompt"]).strip(),
            score_range=score_range,
            rubric=rubric,
            exemplars=exemplars,
        )
    except KeyError as exc:
        raise CorpusError(f"{path}: missing required key {exc.args[0]!r}") from exc


def load_set_configs(directory: str | Path) -> dict[int, EssaySet]:
    """Load every set_*.yaml in a directory, keyed by set_id."""
    directory = Path(directory)
    sets: dict[int, EssaySet] = {}
    for path in sorted(directory.glob("set_*.yaml")):
        essay_set = load_set_config(path)
        if essay_set.set_id in sets:
            raise CorpusError(f"{path}: duplicate set_id {essay_set.set_id}")
        sets[essay_set.set_id] = essay_set
    if not sets:
        raise CorpusError(f"{directory}: no set_*.yaml configs found")
    return sets


def load_fold_map(path: str | Path) -> dict[int, int]:
    """Read a fold map file: header 'essay_id<TAB>fold', one pair per line."""
    path = Path(path)
    fold_map: dict[int, int] = {}
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip().split("\t")
        if header[:2] != ["essay_id", "fold"]:
            raise CorpusError(f"{path}: expected header 'essay_id\\tfold', got {header}")
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            try:
                essay_id, fold = int(parts[0]), int(parts[1])
            except (ValueError, IndexError) as exc:
                raise CorpusError(f"{path}:{line_no}: malformed pair") from exc
            if essay_id in fold_map:
                raise CorpusError(f"{path}:{line_no}: duplicate essay_id {essay_id}")
            fold_map[essay_id] = fold
    return fold_map


def assign_folds(essays: Iterable[Essay], fold_map: Mapping[int, int]) -> list[FoldSplit]:
    """Build the 5 splits from an essay_id -> fold map.

    For fold k: test = essays in fold k, dev = essays in fold (k+1) mod 5,
    train = the rest. Each essay is the test item of exactly one fold.
    """
    essays = list(essays)
    missing = sorted(e.essay_id for e in essays if e.essay_id not in fold_map)
    if missing:
        raise CorpusError(f"essays missing from fold map: {missing}")
    by_fold: dict[int, set[int]] = {k: set() for k in range(N_FOLDS)}
    for essay in essays:
        fold = fold_map[essay.essay_id]
        if not 0 <= fold < N_FOLDS:
            raise CorpusError(
                f"essay {essay.essay_id}: fold index {fold} outside 0-{N_FOLDS - 1}"
            )
        by_fold[fold].add(essay.essay_id)

    splits: list[FoldSplit] = []
    all_ids = {e.essay_id for e in essays}
    for k in range(N_FOLDS):
        test = frozenset(by_fold[k])
        dev = frozenset(by_fold[(k + 1) % N_FOLDS])
        train = frozenset(all_ids - test - dev)
        splits.append(FoldSplit(fold_index=k, train_ids=train, dev_ids=dev, test_ids=test))
    return splits


@dataclass(frozen=True)
class Corpus:
    """Validated essays, per-set configuration, and fold splits."""

    sets: dict[int, EssaySet]
    essays: tuple[Essay, ...]
    folds: tuple[FoldSplit, ...]
    _by_id: dict[int, Essay] = field(init=False, repr=False, hash=False, compare=False)

    def __post_init__(self) -> None:
        by_id: dict[int, Essay] = {}
        for essay in self.essays:
            if essay.essay_id in by_id:
                raise CorpusError(f"duplicate essay_id {essay.essay_id}")
            if essay.set_id not in self.sets:
                raise CorpusError(f"essay {essay.essay_id} references unknown set {essay.set_id}")
            if not self.sets[essay.set_id].score_range.contains(essay.gold_score):
                raise CorpusError(
                    f"essay {essay.essay_id}: gold score {essay.gold_score} outside "
                    f"set {essay.set_id} range"
                )
            by_id[essay.essay_id] = essay
        object.__setattr__(self, "_by_id", by_id)

    @classmethod
    def load(
        cls,
        essays_path: str | Path,
        sets_dir: str | Path,
        folds_path: str | Path,
    ) -> "Corpus":
        sets = load_set_configs(sets_dir)
        essays = load_essays(essays_path, sets=sets)
        folds = assign_folds(essays, load_fold_map(folds_path))
        return cls(sets=sets, essays=tuple(essays), folds=tuple(folds))

    def essay(self, essay_id: int) -> Essay:
        return self._by_id[essay_id]

    def gold_by_id(self) -> dict[int, int]:
        return {e.essay_id: e.gold_score for e in self.essays}

    def ranges_by_set(self) -> dict[int, ScoreRange]:
        return {set_id: s.score_range for set_id, s in self.sets.items()}

    def split_essays(self, set_ids: Iterable[int], fold: int, role: str) -> list[Essay]:
        """Essays of the given sets that play `role` (train/dev/test) in `fold`."""
        wanted = set(set_ids)
        ids = self.folds[fold].ids_for(role)
        return [e for e in self.essays if e.essay_id in ids and e.set_id in wanted]


def fixture_dir() -> Path:
    """Directory of the bundled desk-scale fixture corpus."""
    return Path(str(resources.files("promptgrade.data").joinpath("fixture")))


def load_fixture_corpus() -> Corpus:
    """Load the bundled 40-essay synthetic corpus (5 essays per set)."""
    root = fixture_dir()
    return Corpus.load(root / "essays.tsv", root / "sets", root / "folds.tsv")

"""Experiment configuration files (YAML): plan, endpoint, corpus, cache."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .corpus import Corpus, CorpusError, load_fixture_corpus
from .experiment import ExperimentError, ExperimentPlan
from .llm_client import EndpointConfig
from .templates import InstructionKind, PatternKind, ShotMode

_PATTERN_ALIASES = {
    "base": PatternKind.BASE,
    "ta": PatternKind.TEACHERS_ASSISTANT,
    "teachers_assistant": PatternKind.TEACHERS_ASSISTANT,
    "er": PatternKind.EDUCATIONAL_RESEARCHER,
    "educational_researcher": PatternKind.EDUCATIONAL_RESEARCHER,
    "cwm": PatternKind.CREATIVE_WRITING_MENTOR,
    "creative_writing_mentor": PatternKind.CREATIVE_WRITING_MENTOR,
}


@dataclass(frozen=True)
class RunConfig:
    plan: ExperimentPlan
    corpus_fixture: bool
    essays_path: Path | None
    sets_dir: Path | None
    folds_path: Path | None
    cache_dir: Path
    workers: int

    def load_corpus(self) -> Corpus:
        if self.corpus_fixture:
            return load_fixture_corpus()
        if not (self.essays_path and self.sets_dir and self.folds_path):
            raise CorpusError(
                "config needs corpus.fixture: true or corpus.essays/sets_dir/folds paths"
            )
        return Corpus.load(self.essays_path, self.sets_dir, self.folds_path)


def _parse_pattern(name: str) -> PatternKind:
    key = str(name).lower()
    if key not in _PATTERN_ALIASES:
        raise ExperimentError(f"unknown pattern {name!r}")
    return _PATTERN_ALIASES[key]


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}

    endpoint_data = data.get("endpoint", {})
    endpoint = EndpointConfig(
        base_url=endpoint_data.get("base_url", "http://localhost:8000"),
        model_name=endpoint_data.get("model_name", "mock-model"),
        api_key_env=endpoint_data.get("api_key_env", ""),
        timeout=float(endpoint_data.get("timeout", 60.0)),
        max_new_tokens=int(endpoint_data.get("max_new_tokens", 1024)),
    )

    plan_data = data.get("plan", {})
    plan = ExperimentPlan(
        patterns=tuple(
            _parse_pattern(p) for p in plan_data.get("patterns", [k.value for k in PatternKind])
        ),
        instruction_types=tuple(
            InstructionKind(i)
            for i in plan_data.get("instruction_types", [k.value for k in InstructionKind])
        ),
        paraphrases=tuple(plan_data.get("paraphrases", [1, 2, 3, 4])),
        shot_modes=tuple(ShotMode(s) for s in plan_data.get("shot_modes", ["zero"])),
        sets=tuple(plan_data.get("sets", list(range(1, 9)))),
        folds=tuple(plan_data.get("folds", list(range(5)))),
        endpoint=endpoint,
        seed=int(plan_data.get("seed", 0)),
    )

    corpus_data = data.get("corpus", {})
    base = path.parent

    def resolve(key: str) -> Path | None:
        value = corpus_data.get(key)
        return (base / value).resolve() if value else None

    return RunConfig(
        plan=plan,
        corpus_fixture=bool(corpus_data.get("fixture", False)),
        essays_path=resolve("essays"),
        sets_dir=resolve("sets_dir"),
        folds_path=resolve("folds"),
        cache_dir=(base / data.get("cache_dir", ".promptgrade-cache")).resolve(),
        workers=int(data.get("workers", 1)),
    )

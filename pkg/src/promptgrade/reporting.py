"""Result tables and report files.

Two table shapes: per-set QWK tables (rows = pattern / instruction type /
shot mode; columns = essay sets, mean, unscored count) and helpfulness tables
(rows = facet; one mean ± std column per judge model). Rendering is
deterministic: identical tables produce identical bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import ScoreRange
from .experiment import (
    ExperimentError,
    RunRecord,
    _best_strategy,
    cell_qwk,
)
from .judge import HelpfulnessJudgment
from .metrics import mean_std
from .templates import InstructionKind, PatternKind, ShotMode

FACETS = ("pattern", "instruction_type", "shot_mode")
AGGREGATIONS = ("mean-over-instructions", "best-on-dev")

_FACET_ORDER = {
    "pattern": list(PatternKind),
    "instruction_type": list(InstructionKind),
    "shot_mode": list(ShotMode),
}


def _facet_value(record: RunRecord, facet: str):
    if facet == "pattern":
        return record.pattern
    if facet == "instruction_type":
        return record.instruction
    return record.shot_mode


def _facet_label(value) -> str:
    return value.label if hasattr(value, "label") else value.value.capitalize()


@dataclass(frozen=True)
class TableRow:
    key: str
    per_set: Mapping[int, float | None]
    mean: float | None
    unscored: int
    note: str = ""

    @property
    def available(self) -> bool:
        return self.mean is not None


def make_row(key: str, per_set: Mapping[int, float | None], unscored: int, note: str = "") -> TableRow:
    present = [v for v in per_set.values() if v is not None]
    mean = sum(present) / len(present) if present else None
    return TableRow(key=key, per_set=dict(per_set), mean=mean, unscored=unscored, note=note)


@dataclass(frozen=True)
class ResultsTable:
    title: str
    facet: str
    set_ids: tuple[int, ...]
    rows: tuple[TableRow, ...]


@dataclass(frozen=True)
class HelpfulnessCell:
    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class HelpfulnessTable:
    title: str
    facet: str
    models: tuple[str, ...]
    rows: tuple[tuple[str, Mapping[str, HelpfulnessCell | None]], ...]


@dataclass(frozen=True)
class SimpleTable:
    """Pre-formatted header + string rows, for one-off report shapes."""

    title: str
    header: tuple[str, ...]
    body: tuple[tuple[str, ...], ...]


def score_table(
    records: Sequence[RunRecord],
    facet: str,
    aggregation: str,
    gold: Mapping[int, int],
    ranges: Mapping[int, ScoreRange],
    eval_split: str = "test",
    title: str | None = None,
) -> ResultsTable:
    """Per-set QWK table for one facet.

    mean-over-instructions: each cell averages QWK over the distinct
    strategies inside the row (per-set QWK computed on scored essays only).
    best-on-dev: the strategy maximizing mean dev QWK is selected per row and
    evaluated on the eval split; the selection is recorded in the row note.
    """
    if facet not in FACETS:
        raise ExperimentError(f"facet must be one of {FACETS}, got {facet!r}")
    if aggregation not in AGGREGATIONS:
        raise ExperimentError(f"aggregation must be one of {AGGREGATIONS}, got {aggregation!r}")

    set_ids = tuple(sorted({r.set_id for r in records}))
    eval_records = [r for r in records if r.split_role == eval_split]
    rows: list[TableRow] = []
    for value in _FACET_ORDER[facet]:
        row_eval = [r for r in eval_records if _facet_value(r, facet) == value]
        row_present = row_eval or any(_facet_value(r, facet) == value for r in records)
        if not row_present:
            continue
        label = _facet_label(value)
        if aggregation == "best-on-dev":
            row_dev = [
                r
                for r in records
                if r.split_role == "dev" and _facet_value(r, facet) == value
            ]
            try:
                best = _best_strategy(row_dev, gold, ranges)
            except ExperimentError:
                rows.append(make_row(label, {sid: None for sid in set_ids}, 0, note="no dev data"))
                continue
            chosen = [r for r in row_eval if r.strategy == best]
            per_set = {
                sid: cell_qwk([r for r in chosen if r.set_id == sid], gold, ranges[sid])
                for sid in set_ids
            }
            unscored = sum(1 for r in chosen if not r.extraction.scored)
            note = f"{best.pattern.label} #{best.paraphrase_index}"
            rows.append(make_row(label, per_set, unscored, note))
        else:
            per_set = {}
            for sid in set_ids:
                cell_records = [r for r in row_eval if r.set_id == sid]
                groups: dict = {}
                for record in cell_records:
                    groups.setdefault(record.strategy, []).append(record)
                values = [
                    v
                    for group in groups.values()
                    if (v := cell_qwk(group, gold, ranges[sid])) is not None
                ]
                per_set[sid] = sum(values) / len(values) if values else None
            unscored = sum(1 for r in row_eval if not r.extraction.scored)
            rows.append(make_row(label, per_set, unscored))

    return ResultsTable(
        title=title or f"QWK by {facet} ({aggregation})",
        facet=facet,
        set_ids=set_ids,
        rows=tuple(rows),
    )


def helpfulness_table(
    judgments_by_model: Mapping[str, Sequence[HelpfulnessJudgment]],
    records: Sequence[RunRecord],
    facet: str,
    title: str | None = None,
) -> HelpfulnessTable:
    """Mean ± std helpfulness per facet row, one column per judge model."""
    if facet not in FACETS:
        raise ExperimentError(f"facet must be one of {FACETS}, got {facet!r}")
    by_run = {r.run_id: r for r in records}
    models = tuple(sorted(judgments_by_model))
    rows = []
    for value in _FACET_ORDER[facet]:
        if not any(_facet_value(r, facet) == value for r in records):
            continue
        cells: dict[str, HelpfulnessCell | None] = {}
        for model in models:
            scores = [
                j.score
                for j in judgments_by_model[model]
                if j.item in by_run and _facet_value(by_run[j.item], facet) == value
            ]
            if scores:
                mean, std = mean_std(scores)
                cells[model] = HelpfulnessCell(mean=mean, std=std, n=len(scores))
            else:
                cells[model] = None
        rows.append((_facet_label(value), cells))
    return HelpfulnessTable(
        title=title or f"Helpfulness by {facet}",
        facet=facet,
        models=models,
        rows=tuple(rows),
    )


def _slug(title: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", title.lower()).strip("-")


def _fmt_qwk(value: float | None) -> str:
    return "-" if value is None else f"{value:.3f}"


def _fmt_help(cell: HelpfulnessCell | None) -> str:
    if cell is None:
        return "-"
    return f"{cell.mean:.2f} \u00b1 {cell.std:.2f} (n={cell.n})"


def _table_grid(table: ResultsTable | HelpfulnessTable | SimpleTable) -> tuple[list[str], list[list[str]]]:
    if isinstance(table, SimpleTable):
        return list(table.header), [list(row) for row in table.body]
    if isinstance(table, ResultsTable):
        facet_header = table.facet.replace("_", " ").title()
        header = [facet_header, *[str(s) for s in table.set_ids], "Mean", "Unscored"]
        has_notes = any(row.note for row in table.rows)
        if has_notes:
            header.append("Selection")
        body = []
        for row in table.rows:
            cells = [row.key]
            cells += [_fmt_qwk(row.per_set.get(sid)) for sid in table.set_ids]
            cells += [_fmt_qwk(row.mean), str(row.unscored)]
            if has_notes:
                cells.append(row.note or "-")
            body.append(cells)
        return header, body
    header = [table.facet.replace("_", " ").title(), *table.models]
    body = [[label, *[_fmt_help(cells[m]) for m in table.models]] for label, cells in table.rows]
    return header, body


def render_markdown(table: ResultsTable | HelpfulnessTable | SimpleTable) -> str:
    header, body = _table_grid(table)
    lines = [f"# {table.title}", ""]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "|".join([" --- "] * len(header)) + "|")
    for row in body:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def render_delimited(table: ResultsTable | HelpfulnessTable | SimpleTable) -> str:
    header, body = _table_grid(table)
    lines = ["\t".join(header)]
    lines += ["\t".join(row) for row in body]
    return "\n".join(lines) + "\n"


def render_plain(table: ResultsTable | HelpfulnessTable | SimpleTable) -> str:
    header, body = _table_grid(table)
    widths = [
        max(len(header[i]), *(len(row[i]) for row in body)) if body else len(header[i])
        for i in range(len(header))
    ]
    def fmt(cells: list[str]) -> str:
        return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(cells)).rstrip()
    lines = [table.title, "=" * len(table.title), fmt(header)]
    lines += [fmt(row) for row in body]
    return "\n".join(lines) + "\n"


_RENDERERS = {
    "markdown": (render_markdown, ".md"),
    "delimited": (render_delimited, ".tsv"),
    "plain": (render_plain, ".txt"),
}


def emit_report(
    tables: Sequence[ResultsTable | HelpfulnessTable | SimpleTable],
    fmt: str,
    out_dir: str | Path,
) -> list[Path]:
    """Write one file per table; byte-deterministic for identical inputs."""
    if fmt not in _RENDERERS:
        raise ExperimentError(f"format must be one of {sorted(_RENDERERS)}, got {fmt!r}")
    render, ext = _RENDERERS[fmt]
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExperimentError(f"cannot create report directory {out_dir}: {exc}") from exc
    paths = []
    for table in tables:
        path = out_dir / f"{_slug(table.title)}{ext}"
        path.write_text(render(table), encoding="utf-8")
        paths.append(path)
    return paths

"""Command-line interface.

Subcommands: ingest, run, judge, report, correlate, annotate-serve,
sample-annotation. `run` and `judge` accept --mock to use the built-in
deterministic endpoint, so the bundled fixture pipeline works offline.
"""

from __future__ import annotations

import logging
import random
from collections import Counter
from dataclasses import replace

import click

from .annotation import (
    AnnotationError,
    AnnotationStore,
    AnnotationStudy,
    STATEMENT_KEYS,
    assign_groups,
    build_export,
    correlate_manual_automatic,
    group_alpha,
    manual_results_table,
    sample_annotation_items,
)
from .config import load_config
from .corpus import Corpus
from .experiment import read_records, run_grid, write_records
from .judge import JudgmentError, judge as judge_one, read_judgments, write_judgments
from .llm_client import ResponseCache
from .mock import mock_transport
from .reporting import SimpleTable, emit_report, helpfulness_table, score_table
from .templates import InstructionKind, ShotMode

logger = logging.getLogger(__name__)


@click.group()
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Prompting-strategy grid for joint essay scoring and feedback generation."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO)


@main.command()
@click.option("--essays", "essays_path", required=True, type=click.Path(exists=True))
@click.option("--sets-dir", required=True, type=click.Path(exists=True))
@click.option("--folds", "folds_path", required=True, type=click.Path(exists=True))
def ingest(essays_path: str, sets_dir: str, folds_path: str) -> None:
    """Load and validate a corpus; print a per-set summary."""
    corpus = Corpus.load(essays_path, sets_dir, folds_path)
    counts = Counter(e.set_id for e in corpus.essays)
    click.echo(f"essays: {len(corpus.essays)} across {len(corpus.sets)} sets")
    for set_id in sorted(corpus.sets):
        rng = corpus.sets[set_id].score_range
        click.echo(
            f"  set {set_id}: {counts.get(set_id, 0)} essays, range {rng.min}-{rng.max}, "
            f"{len(corpus.sets[set_id].rubric)} rubric levels, "
            f"{len(corpus.sets[set_id].exemplars)} exemplars"
        )
    for fold in corpus.folds:
        click.echo(
            f"  fold {fold.fold_index}: test={len(fold.test_ids)} "
            f"dev={len(fold.dev_ids)} train={len(fold.train_ids)}"
        )
    click.echo("validation ok")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--records", "records_path", required=True, type=click.Path())
@click.option("--split", type=click.Choice(["dev", "test", "both"]), default="both")
@click.option("--mock", is_flag=True, help="Use the built-in deterministic endpoint.")
@click.option("--workers", type=int, default=None, help="Override configured worker count.")
def run(config_path: str, records_path: str, split: str, mock: bool, workers: int | None) -> None:
    """Run the configured strategy grid and persist run records."""
    cfg = load_config(config_path)
    corpus = cfg.load_corpus()
    cache = ResponseCache(cfg.cache_dir)
    transport = mock_transport(seed=cfg.plan.seed) if mock else None
    failures: list[tuple[dict, Exception]] = []

    records = []
    for role in ("dev", "test") if split == "both" else (split,):
        records.extend(
            run_grid(
                cfg.plan,
                role,
                corpus,
                cache,
                transport=transport,
                workers=workers or cfg.workers,
                on_failure=lambda coords, exc: failures.append((coords, exc)),
            )
        )
    write_records(records_path, records)
    unscored = sum(1 for r in records if not r.extraction.scored)
    click.echo(
        f"wrote {len(records)} records to {records_path} "
        f"({unscored} unscored, {len(failures)} failed runs)"
    )


@main.command("judge")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--judge-model", default=None, help="Override the endpoint model name.")
@click.option("--mock", is_flag=True, help="Use the built-in deterministic endpoint.")
def judge_cmd(
    config_path: str, records_path: str, out_path: str, judge_model: str | None, mock: bool
) -> None:
    """Score every record's feedback for helpfulness with the judge model."""
    cfg = load_config(config_path)
    corpus = cfg.load_corpus()
    endpoint = cfg.plan.endpoint
    if judge_model:
        endpoint = replace(endpoint, model_name=judge_model)
    cache = ResponseCache(cfg.cache_dir)
    transport = mock_transport(seed=cfg.plan.seed) if mock else None

    records = read_records(records_path)
    judgments, errors, skipped = [], 0, 0
    for record in records:
        if record.feedback.is_empty:
            skipped += 1
            continue
        essay = corpus.essay(record.essay_id)
        try:
            judgments.append(
                judge_one(
                    essay.text,
                    record.feedback.text,
                    endpoint,
                    item=record.run_id,
                    cache=cache,
                    transport=transport,
                )
            )
        except JudgmentError as exc:
            logger.warning("judgment failed: %s", exc)
            errors += 1
    write_judgments(out_path, judgments)
    click.echo(
        f"wrote {len(judgments)} judgments to {out_path} "
        f"({errors} judgment errors, {skipped} empty feedbacks skipped)"
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--judgments", "judgment_paths", multiple=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["markdown", "delimited", "plain"]),
              default="markdown")
def report(
    config_path: str,
    records_path: str,
    judgment_paths: tuple[str, ...],
    out_dir: str,
    fmt: str,
) -> None:
    """Emit the QWK and helpfulness tables from persisted records."""
    cfg = load_config(config_path)
    corpus = cfg.load_corpus()
    gold = corpus.gold_by_id()
    ranges = corpus.ranges_by_set()
    records = read_records(records_path)

    zero_shot = [r for r in records if r.shot_mode is ShotMode.ZERO] or records
    scoring_feedback = [
        r for r in records if r.instruction is InstructionKind.SCORING_THEN_FEEDBACK
    ]

    tables = [
        score_table(
            zero_shot, "pattern", "mean-over-instructions", gold, ranges,
            title="QWK by prompt pattern (zero-shot, mean over instructions)",
        ),
        score_table(
            zero_shot, "instruction_type", "best-on-dev", gold, ranges,
            title="QWK by task instruction type (best on dev)",
        ),
    ]
    if scoring_feedback:
        tables.append(
            score_table(
                scoring_feedback, "shot_mode", "best-on-dev", gold, ranges,
                title="QWK by in-context learning (best on dev)",
            )
        )

    if judgment_paths:
        judgments = [j for p in judgment_paths for j in read_judgments(p)]
        by_model: dict[str, list] = {}
        for j in judgments:
            by_model.setdefault(j.judge_model, []).append(j)
        tables.append(
            helpfulness_table(
                by_model, zero_shot, "pattern",
                title="Helpfulness by prompt pattern (zero-shot)",
            )
        )
        tables.append(
            helpfulness_table(
                by_model, zero_shot, "instruction_type",
                title="Helpfulness by task instruction type (zero-shot)",
            )
        )
        if scoring_feedback:
            tables.append(
                helpfulness_table(
                    by_model, scoring_feedback, "shot_mode",
                    title="Helpfulness by in-context learning",
                )
            )

    paths = emit_report(tables, fmt, out_dir)
    for path in paths:
        click.echo(f"wrote {path}")


@main.command("sample-annotation")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--annotators", "n_annotators", type=int, default=12)
@click.option("--set-id", type=int, default=4)
@click.option("--n", "n_items", type=int, default=24)
@click.option("--seed", type=int, default=0)
def sample_annotation(
    config_path: str,
    records_path: str,
    out_path: str,
    n_annotators: int,
    set_id: int,
    n_items: int,
    seed: int,
) -> None:
    """Sample feedback items and build the annotator-group study bundle."""
    cfg = load_config(config_path)
    corpus = cfg.load_corpus()
    records = read_records(records_path)
    rng = random.Random(seed)
    items = sample_annotation_items(records, corpus, rng, set_id=set_id, n=n_items)
    annotator_ids = [f"annotator-{i:02d}" for i in range(1, n_annotators + 1)]
    groups = assign_groups(items, annotator_ids)
    study = AnnotationStudy(items=tuple(items), groups=tuple(groups))
    study.save(out_path)
    click.echo(f"wrote study with {len(items)} items and {len(groups)} groups to {out_path}")
    for group in groups:
        click.echo(f"  group {group.group_id}: {', '.join(group.annotator_ids)}")


@main.command("annotate-serve")
@click.option("--study", "study_path", required=True, type=click.Path(exists=True))
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8080)
@click.option("--ui-dir", default=None, type=click.Path(exists=True),
              help="Serve a built frontend from this directory at /.")
def annotate_serve(study_path: str, store_path: str, host: str, port: int, ui_dir: str | None) -> None:
    """Serve the annotation study over HTTP."""
    import uvicorn

    from .annotation_service import create_app

    study = AnnotationStudy.load(study_path)
    store = AnnotationStore(store_path)
    app = create_app(study, store, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.option("--study", "study_path", required=True, type=click.Path(exists=True))
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--judgments", "judgment_paths", multiple=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["markdown", "delimited", "plain"]),
              default="markdown")
@click.option("--statement", default="s5", type=click.Choice(list(STATEMENT_KEYS)),
              help="Statement used for the per-group agreement.")
def correlate(
    study_path: str,
    store_path: str,
    judgment_paths: tuple[str, ...],
    out_dir: str,
    fmt: str,
    statement: str,
) -> None:
    """Analyze the manual study and correlate it with automatic judgments."""
    study = AnnotationStudy.load(study_path)
    store = AnnotationStore(store_path)
    export = build_export(study, store)

    tables = []
    manual_rows = manual_results_table(export)
    tables.append(
        SimpleTable(
            title="Manual study: mean statement scores by strategy",
            header=("Strategy", *[k.upper() for k in STATEMENT_KEYS]),
            body=tuple(
                (InstructionKind(strategy).label,
                 *[f"{means[k]:.2f}" for k in STATEMENT_KEYS])
                for strategy, means in manual_rows
            ),
        )
    )

    alphas, mean_alpha = group_alpha(export, statement=statement)
    tables.append(
        SimpleTable(
            title=f"Inter-annotator agreement ({statement.upper()}, interval alpha)",
            header=("Group", "Alpha"),
            body=tuple(
                [(str(i + 1), f"{a:.3f}") for i, a in enumerate(alphas)]
                + [("mean", f"{mean_alpha:.3f}")]
            ),
        )
    )

    if judgment_paths:
        judgments = [j for p in judgment_paths for j in read_judgments(p)]
        try:
            correlations = correlate_manual_automatic(export, judgments)
        except AnnotationError as exc:
            raise click.ClickException(str(exc))
        tables.append(
            SimpleTable(
                title="Pearson correlation of manual statements and automatic helpfulness",
                header=("Judge model", *[k.upper() for k in STATEMENT_KEYS]),
                body=tuple(
                    (model, *[
                        "-" if cells[k] is None else f"{cells[k]:.2f}"
                        for k in STATEMENT_KEYS
                    ])
                    for model, cells in correlations.items()
                ),
            )
        )

    paths = emit_report(tables, fmt, out_dir)
    for path in paths:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()

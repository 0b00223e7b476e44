"""HTTP backend for the annotation study.

JSON endpoints only; any frontend that can fetch and POST JSON can drive a
session. Responses sent to annotators never include the source strategy or
any scoring information.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .annotation import (
    LIKERT_MAX,
    LIKERT_MIN,
    SCALE_LABELS,
    STATEMENT_KEYS,
    STATEMENTS,
    AnnotationStore,
    AnnotationStudy,
    build_export,
    make_record,
)


class AnnotationIn(BaseModel):
    item_id: str
    s1: int = Field(ge=LIKERT_MIN, le=LIKERT_MAX)
    s2: int = Field(ge=LIKERT_MIN, le=LIKERT_MAX)
    s3: int = Field(ge=LIKERT_MIN, le=LIKERT_MAX)
    s4: int = Field(ge=LIKERT_MIN, le=LIKERT_MAX)
    s5: int = Field(ge=LIKERT_MIN, le=LIKERT_MAX)


def create_app(
    study: AnnotationStudy,
    store: AnnotationStore,
    ui_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="essay feedback annotation")

    def require_group(annotator_id: str):
        group = study.group_of(annotator_id)
        if group is None:
            raise HTTPException(status_code=404, detail="unknown annotator")
        return group

    @app.get("/api/statements")
    def statements() -> dict:
        return {
            "statements": [{"key": key, "text": STATEMENTS[key]} for key in STATEMENT_KEYS],
            "scale": {
                "min": LIKERT_MIN,
                "max": LIKERT_MAX,
                "labels": {str(k): v for k, v in SCALE_LABELS.items()},
            },
        }

    @app.get("/api/annotators/{annotator_id}/items")
    def items_for_annotator(annotator_id: str) -> dict:
        group = require_group(annotator_id)
        answered = {
            record.item_id: record
            for record in store.latest()
            if record.annotator_id == annotator_id
        }
        payload = []
        for item_id in group.item_ids:
            item = study.item(item_id)
            record = answered.get(item_id)
            payload.append(
                {
                    "item_id": item.item_id,
                    "essay_prompt": item.essay_prompt,
                    "essay": item.essay,
                    "feedback": item.feedback,
                    "answers": (
                        {key: getattr(record, key) for key in STATEMENT_KEYS}
                        if record is not None
                        else None
                    ),
                }
            )
        return {"items": payload}

    @app.post("/api/annotators/{annotator_id}/annotations")
    def submit(annotator_id: str, annotation: AnnotationIn) -> dict:
        group = require_group(annotator_id)
        if annotation.item_id not in group.item_ids:
            raise HTTPException(status_code=404, detail="item not assigned to this annotator")
        record = make_record(
            annotator_id,
            annotation.item_id,
            {key: getattr(annotation, key) for key in STATEMENT_KEYS},
        )
        store.add(record)
        return {"status": "accepted", "item_id": annotation.item_id}

    @app.get("/api/annotators/{annotator_id}/progress")
    def progress(annotator_id: str) -> dict:
        group = require_group(annotator_id)
        done = {
            record.item_id
            for record in store.latest()
            if record.annotator_id == annotator_id and record.item_id in group.item_ids
        }
        return {"completed": len(done), "total": len(group.item_ids)}

    @app.get("/api/export")
    def export() -> dict:
        return build_export(study, store).to_json()

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app

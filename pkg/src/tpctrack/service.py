"""HTTP JSON service backing the browser labeling workflow.

The service never mutates the event file; every write goes to the
append-only label log. Endpoints are versioned through an api_version
field on every JSON payload.
"""

from __future__ import annotations

import io
import os
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException, Response
from fastapi.responses import HTMLResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .datastore import LabelStore, _event_to_json
from .detector import ImageGridSpec
from .features import project_image, to_grayscale_png

API_VERSION = 1


class LabelRequest(BaseModel):
    label: Literal["proton", "carbon", "other"]
    annotator: str = "anonymous"


class LabelRecordModel(BaseModel):
    api_version: int = API_VERSION
    record_id: str
    event_id: str
    label: Optional[str]
    annotator: str
    timestamp: float
    supersedes: Optional[str] = None


class NextUnlabeledModel(BaseModel):
    api_version: int = API_VERSION
    event_id: str
    index: int
    remaining: int


class ProgressModel(BaseModel):
    api_version: int = API_VERSION
    total: int
    unlabeled: int
    per_class: dict


class PointsModel(BaseModel):
    api_version: int = API_VERSION
    event_id: str
    label: Optional[str]
    points: list


_FALLBACK_PAGE = """<!doctype html>
<html><head><title>tpctrack label service</title></head>
<body><h1>tpctrack label service</h1>
<p>The labeling UI bundle is not installed. The JSON API is live under
<code>/api</code>; see the project README for endpoints.</p>
</body></html>
"""


def create_app(store: LabelStore, image_grid: Optional[ImageGridSpec] = None,
               ui_dir: Optional[str] = None) -> FastAPI:
    grid = image_grid or ImageGridSpec()
    app = FastAPI(title="tpctrack label service")

    def get_event(event_id: str):
        idx = store._by_id.get(event_id)
        if idx is None:
            raise HTTPException(status_code=404, detail=f"unknown event {event_id!r}")
        return store.events[idx]

    @app.get("/api/events/next-unlabeled", response_model=NextUnlabeledModel,
             responses={204: {"description": "all events labeled"}})
    def next_unlabeled():
        nxt = store.next_unlabeled()
        if nxt is None:
            return Response(status_code=204)
        index, event = nxt
        return NextUnlabeledModel(event_id=event.id, index=index,
                                  remaining=store.progress()["unlabeled"])

    @app.get("/api/events/{event_id}/image.png")
    def event_image(event_id: str):
        event = get_event(event_id)
        image = project_image(event, grid, normalize=True)
        return Response(content=to_grayscale_png(image.values),
                        media_type="image/png")

    @app.get("/api/events/{event_id}/points", response_model=PointsModel)
    def event_points(event_id: str):
        event = get_event(event_id)
        labels = store.effective_labels()
        return PointsModel(event_id=event.id, label=labels.get(event.id),
                           points=event.points.tolist())

    @app.post("/api/events/{event_id}/label", response_model=LabelRecordModel,
              status_code=201)
    def set_label(event_id: str, request: LabelRequest):
        get_event(event_id)
        record = store.set_label(event_id, request.label, request.annotator)
        return LabelRecordModel(**record.__dict__)

    @app.post("/api/events/{event_id}/undo", response_model=LabelRecordModel)
    def undo(event_id: str):
        get_event(event_id)
        try:
            record = store.undo(event_id)
        except LookupError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return LabelRecordModel(**record.__dict__)

    @app.get("/api/progress", response_model=ProgressModel)
    def progress():
        return ProgressModel(**store.progress())

    @app.get("/api/export")
    def export():
        labels = store.effective_labels()

        def stream():
            import json

            header = {"schema_version": 1, "class_names": store.class_names}
            yield json.dumps(header, separators=(",", ":")) + "\n"
            for ev in store.events:
                if ev.id in labels:
                    from .datastore import replace_label

                    yield _event_to_json(replace_label(ev, labels[ev.id])) + "\n"

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index():
            return _FALLBACK_PAGE

    return app

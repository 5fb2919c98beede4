"""HTTP surface of the curation workflow.

Loopback-oriented JSON API over the session store. Reads re-load from disk
on demand, so a restarted service continues exactly where the last
acknowledged write left off; each mutation is audit-logged and committed
atomically before the response goes out.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .corpus import Split, load_csv
from .curation import (
    DEFAULT_CANDIDATES_PER_CLASS,
    DEFAULT_PICKS_PER_CLASS,
    SessionStore,
    export_manifest,
    record_selection,
    start_session,
)
from .errors import DataFormatError, DomainError


class CreateSessionRequest(BaseModel):
    dataset_path: str
    candidates_per_class: int = Field(default=DEFAULT_CANDIDATES_PER_CLASS, ge=1)
    picks_per_class: int = Field(default=DEFAULT_PICKS_PER_CLASS, ge=1)
    seed: int = 0


class SelectionRequest(BaseModel):
    indices: list[int]


def create_app(store: SessionStore) -> FastAPI:
    app = FastAPI(title="curation-service")
    # The UI is served from another local origin (static file or dev server).
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def load_or_404(session_id: str):
        try:
            return store.load(session_id)
        except DomainError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.post("/sessions")
    def create_session(body: CreateSessionRequest):
        path = Path(body.dataset_path)
        try:
            dataset = load_csv(path, Split.TRAIN)
            session = start_session(
                dataset,
                candidates_per_class=body.candidates_per_class,
                picks_per_class=body.picks_per_class,
                seed=body.seed,
                dataset_path=str(path),
            )
        except (DataFormatError, DomainError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        store.save(session)
        store.append_audit(
            session.session_id,
            {"event": "session_created", "dataset_path": str(path)},
        )
        return {"session_id": session.session_id}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return load_or_404(session_id).to_json_dict()

    @app.get("/sessions/{session_id}/classes/{label_id}/candidates")
    def get_candidates(session_id: str, label_id: int):
        session = load_or_404(session_id)
        state = session.classes.get(label_id)
        if state is None:
            raise HTTPException(status_code=404, detail=f"unknown class id {label_id}")
        return [{"row_index": row, "text": text} for row, text in state.candidates]

    @app.put("/sessions/{session_id}/classes/{label_id}/selection")
    def put_selection(session_id: str, label_id: int, body: SelectionRequest):
        session = load_or_404(session_id)
        state = session.classes.get(label_id)
        if state is None:
            raise HTTPException(status_code=404, detail=f"unknown class id {label_id}")
        previous = list(state.selections)
        try:
            state = record_selection(session, label_id, body.indices)
        except DomainError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        # Write-ahead, then atomic commit, then acknowledge.
        store.append_audit(
            session_id,
            {
                "event": "selection_recorded",
                "label_id": label_id,
                "label_name": state.label_name,
                "previous": previous,
                "indices": list(state.selections),
            },
        )
        store.save(session)
        return state.to_json_dict()

    @app.get("/sessions/{session_id}/manifest")
    def get_manifest(session_id: str):
        session = load_or_404(session_id)
        try:
            manifest = export_manifest(session)
        except DomainError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        store.write_manifest(session)
        store.append_audit(session_id, {"event": "manifest_exported"})
        return manifest

    return app

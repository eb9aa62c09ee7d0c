"""Session-oriented HTTP API over the matching pipeline.

Endpoints:

* ``POST /sessions`` run the pipeline over a support ontology plus >= 2
  policy inputs, persist the session, return conflict counts.
* ``GET /sessions/{id}`` session summary.
* ``GET /sessions/{id}/conflicts`` conflict records with proposed actions.
* ``GET /sessions/{id}/correspondences`` the correspondence ontology.
* ``POST /sessions/{id}/conflicts/{cid}/decision`` apply an expert action;
  ``enrich=true`` additionally re-runs enrichment afterwards.
* ``GET /sessions/{id}/export?what=...&format=...`` artifact bytes.

Sessions persist as one document each under ``SMSP_DATA_DIR`` (or the
directory given to :func:`create_app`). Mutations hold a per-session lock;
reads serve a consistent snapshot. Error bodies are
``{code, message, location?}``.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pathlib import Path
from pydantic import BaseModel, Field

from .resolution import ResolutionError, action_from_doc, propose_actions
from .session import (SessionError, SessionStore, apply_action, conflict_fragments,
                      create_state, export_bytes, remaining_conflicts,
                      rerun_enrichment, _conflict_to_doc)
from .similarity import SimilarityConfig

_ERROR_STATUS = {
    "invalid_input": 422,
    "parse_error": 422,
    "invalid_ontology": 400,
    "invalid_action": 400,
    "invalid_export": 400,
    "not_found": 404,
    "already_resolved": 409,
}


class PolicyInputModel(BaseModel):
    lang: str
    domain_id: str
    text: str


class CreateSessionModel(BaseModel):
    support: dict
    policies: list[PolicyInputModel]
    cfg: Optional[dict] = None
    catalogue: Optional[dict] = None
    deontic_table: Optional[dict[str, str]] = None


class DecisionModel(BaseModel):
    action: dict
    enrich: bool = Field(default=False)


def _error_response(code: str, message: str, location: dict | None = None
                    ) -> JSONResponse:
    body = {"code": code, "message": message}
    if location:
        body["location"] = location
    return JSONResponse(status_code=_ERROR_STATUS.get(code, 400), content=body)


def create_app(data_dir: str | None = None,
               static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="smsp", version="0.1.0")
    store = SessionStore(data_dir)
    app.state.store = store

    @app.exception_handler(SessionError)
    async def _session_error(_request: Request, exc: SessionError):
        return _error_response(exc.code, str(exc), exc.location)

    @app.exception_handler(ResolutionError)
    async def _resolution_error(_request: Request, exc: ResolutionError):
        return _error_response("invalid_action", str(exc))

    def _conflict_view(state, record) -> dict:
        doc = _conflict_to_doc(record)
        doc["proposals"] = propose_actions(record, state.catalogue).to_doc()
        doc["fragments"] = conflict_fragments(state, record)
        return doc

    def _session_view(state) -> dict:
        return {
            "session_id": state.session_id,
            "summary": state.summary(),
            "domains": [
                {"domain_id": p.domain_id, "lang": p.lang.value,
                 "rules": len(state.policy_sets[p.domain_id].rules)}
                for p in state.inputs],
            "decisions": len(state.decision_log),
            "needs_review": sorted(state.needs_review),
            "cfg": state.cfg.to_doc(),
        }

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionModel):
        try:
            cfg = SimilarityConfig.from_doc(body.cfg)
        except ValueError as exc:
            raise SessionError(f"invalid similarity config: {exc}") from exc
        catalogue = None
        if body.catalogue is not None:
            from .resolution import catalogue_from_doc
            catalogue = catalogue_from_doc(body.catalogue)
        state = create_state(
            body.support,
            [p.model_dump() for p in body.policies],
            cfg=cfg,
            catalogue=catalogue,
            deontic_table=body.deontic_table,
        )
        with store.lock_for(state.session_id):
            store.save(state)
        return {"session_id": state.session_id, "summary": state.summary()}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_view(store.load(session_id))

    @app.get("/sessions/{session_id}/conflicts")
    def get_conflicts(session_id: str):
        state = store.load(session_id)
        open_records = remaining_conflicts(state)
        resolved = [c for c in state.conflicts if c not in open_records]
        return {
            "session_id": session_id,
            "summary": state.summary(),
            "conflicts": [_conflict_view(state, c) for c in open_records],
            "resolved": [_conflict_view(state, c) for c in resolved],
        }

    @app.get("/sessions/{session_id}/correspondences")
    def get_correspondences(session_id: str):
        state = store.load(session_id)
        from .alignment import correspondences_to_doc
        return correspondences_to_doc(state.correspondences,
                                      f"corr-{state.session_id}")

    @app.post("/sessions/{session_id}/conflicts/{conflict_id}/decision")
    def post_decision(session_id: str, conflict_id: str, body: DecisionModel):
        with store.lock_for(session_id):
            state = store.load(session_id)
            action = action_from_doc({**body.action, "conflict_id": conflict_id})
            apply_action(state, action)
            enrichment = rerun_enrichment(state) if body.enrich else None
            store.save(state)
            entry = state.decision_log[-1]
            out = {
                "session_id": session_id,
                "summary": state.summary(),
                "resulting_status": entry.resulting_status.value,
                "effects": entry.effects,
            }
            if enrichment is not None:
                from .enrichment import report_to_doc
                out["enrichment"] = report_to_doc(enrichment)
            return out

    @app.get("/sessions/{session_id}/export")
    def get_export(session_id: str,
                   what: str = Query(...),
                   format: str = Query("canonical")):
        state = store.load(session_id)
        payload = export_bytes(state, what, format)
        media = "text/turtle" if format == "turtle" else "application/json"
        return Response(content=payload, media_type=media)

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app

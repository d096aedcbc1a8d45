"""HTTP session service for remote listeners.

All request and response bodies are JSON except stimulus audio (WAV bytes)
and the export (CSV). Sessions are addressed by unguessable URL tokens;
there is no further authentication (research-session scope).

Endpoints:
    GET  /health                          liveness probe
    POST /sessions                        create a session (subject, seed?, ...)
    GET  /sessions/{token}                full session status
    GET  /sessions/{token}/next           pending trial metadata + audio URL
    GET  /sessions/{token}/audio/{id}     stimulus WAV (playable once per trial)
    POST /sessions/{token}/responses      submit the typed response, get feedback
    GET  /sessions/{token}/export         trial table as CSV
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, PlainTextResponse
from pydantic import BaseModel, Field

from earbench.session import (
    SessionComplete,
    SessionConflict,
    SessionError,
    SessionManager,
    SessionNotFound,
    StimulusStore,
    TrainingConfig,
)


class CreateSessionRequest(BaseModel):
    subject: str = Field(min_length=1, max_length=64)
    seed: int | None = None
    location: str = "remote"
    headphones_wired: bool = True


class ResponseSubmission(BaseModel):
    stimulus_id: str
    response: str


def create_app(
    store_dir,
    db_path=":memory:",
    training: TrainingConfig | None = None,
    ui_dir=None,
) -> FastAPI:
    store = StimulusStore(store_dir)
    manager = SessionManager(store, db_path)
    app = FastAPI(title="earbench session service")
    app.state.manager = manager
    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=ui_dir, html=True), name="ui")

    def _guard(fn, *args):
        try:
            return fn(*args)
        except SessionNotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except (SessionConflict, SessionComplete) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except SessionError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/health")
    def health():
        return {"status": "ok", "stimuli": len(store.stimuli)}

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        token = _guard(
            lambda: manager.create_session(
                subject=req.subject,
                seed=req.seed,
                location=req.location,
                training=training,
                headphones_wired=req.headphones_wired,
            )
        )
        return manager.status(token)

    @app.get("/sessions/{token}")
    def status(token: str):
        return _guard(manager.status, token)

    @app.get("/sessions/{token}/next")
    def next_trial(token: str):
        return _guard(manager.next_trial, token)

    @app.get("/sessions/{token}/audio/{stimulus_id}")
    def audio(token: str, stimulus_id: str):
        path = _guard(manager.fetch_audio, token, stimulus_id)
        return FileResponse(path, media_type="audio/wav")

    @app.post("/sessions/{token}/responses")
    def submit(token: str, body: ResponseSubmission):
        return _guard(manager.submit_response, token, body.stimulus_id, body.response)

    @app.get("/sessions/{token}/export")
    def export(token: str):
        return PlainTextResponse(_guard(manager.export_csv, token), media_type="text/csv")

    return app

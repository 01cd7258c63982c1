"""HTTP API for the interactive storyteller.

All endpoints live under /v1 and speak JSON; errors use a uniform body
``{"code", "message", "detail"}``. The optional UI bundle is served statically
under /app when a build directory is provided.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .corpus import Corpus
from .errors import ConfigError, FablegenError
from .pipeline import PipelineConfig, run_pipeline
from .sessions import SessionError, SessionStore


class SessionCreate(BaseModel):
    story_id: str


class AnswerSubmit(BaseModel):
    question_id: str
    user_answer: str
    idempotency_key: str | None = None


def _error(status: int, code: str, message: str, detail: str | None = None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "detail": detail},
    )


def create_app(
    corpus: Corpus,
    config: PipelineConfig | None = None,
    data_dir: str | Path = "data",
    ui_dir: str | Path | None = None,
) -> FastAPI:
    config = config or PipelineConfig()
    app = FastAPI(title="fablegen storyteller", version="1.0")
    store = SessionStore(corpus, config, data_dir)
    app.state.store = store

    @app.exception_handler(SessionError)
    async def _session_error(request: Request, exc: SessionError):
        status = 404 if exc.code == "not_found" else 400
        return _error(status, exc.code, str(exc))

    @app.exception_handler(ConfigError)
    async def _config_error(request: Request, exc: ConfigError):
        return _error(400, "bad_config", str(exc))

    @app.exception_handler(FablegenError)
    async def _fablegen_error(request: Request, exc: FablegenError):
        return _error(500, "internal_error", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return _error(422, "validation_error", "invalid request", detail=str(exc.errors()))

    @app.get("/v1/books")
    def list_books():
        return {
            "books": [
                {
                    "story_id": story.story_id,
                    "title": story.title,
                    "split": story.split.value,
                    "section_count": len(story.sections),
                }
                for story in corpus.stories
            ]
        }

    @app.get("/v1/books/{story_id}/sections/{index}")
    def get_section(story_id: str, index: int):
        if not corpus.has_story(story_id):
            return _error(404, "not_found", f"unknown story '{story_id}'")
        story = corpus.story(story_id)
        try:
            section = story.section(index)
        except KeyError:
            return _error(404, "not_found", f"story '{story_id}' has no section {index}")
        return {"story_id": story_id, "index": section.index, "text": section.text,
                "section_count": len(story.sections)}

    @app.post("/v1/books/{story_id}/qag")
    def qag(story_id: str, top_n: int | None = None, mode: str | None = None):
        if not corpus.has_story(story_id):
            return _error(404, "not_found", f"unknown story '{story_id}'")
        run_config = config
        changes = {}
        if top_n is not None:
            changes["top_n"] = top_n
        if mode is not None:
            changes["mode"] = mode
            if mode == "two_step_baseline":
                from .qgen import get_qg_backend

                try:
                    backend = get_qg_backend(config.qg_backend_id)
                except KeyError:
                    backend = None
                if backend is None or not hasattr(backend, "generate_questions"):
                    changes["qg_backend_id"] = "template_question_first"
        if changes:
            from dataclasses import replace

            run_config = replace(config, **changes)
        result = run_pipeline(corpus.story(story_id), run_config)
        return {
            "story_id": story_id,
            "mode": run_config.mode,
            "top_n": run_config.top_n,
            "sections": {
                str(index): [pair.to_dict() for pair in pairs]
                for index, pairs in sorted(result.pairs.items())
            },
            "errors": {str(k): v for k, v in result.errors.items()},
        }

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: SessionCreate):
        session = store.create(body.story_id)
        return store.session_view(session)

    @app.get("/v1/sessions/{session_id}/next")
    def next_question(session_id: str):
        return store.next_question(session_id)

    @app.post("/v1/sessions/{session_id}/answer")
    def submit_answer(session_id: str, body: AnswerSubmit):
        verdict, replayed = store.answer(
            session_id, body.question_id, body.user_answer, body.idempotency_key
        )
        return {
            "question_id": body.question_id,
            "verdict": verdict.to_dict(),
            "replayed": replayed,
        }

    @app.get("/v1/sessions/{session_id}/progress")
    def progress(session_id: str):
        return store.progress(session_id)

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app

"""FastAPI application exposing the annotation workflow over HTTP/JSON.

All errors come back as ``{"code": ..., "message": ...}``; workers
authenticate with static bearer tokens from the service config.
"""

from __future__ import annotations

import time
from typing import Callable

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse, Response

from .config import ServiceConfig
from .export import export_datasets
from .schemas import (
    AdvanceRequest,
    CommandRow,
    DocumentResponse,
    ExportRequest,
    ExportResponse,
    JudgmentRequest,
    JudgmentResponse,
    NextTaskResponse,
    SentenceRow,
    SessionStateResponse,
)
from .store import ApiError, ServiceState


def create_app(
    config: ServiceConfig, clock: Callable[[], float] = time.time
) -> FastAPI:
    state = ServiceState(config, clock=clock)
    app = FastAPI(title="cpk annotation service")
    app.state.annotation = state

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    def worker(authorization: str = Header(default="")) -> str:
        if not authorization.startswith("Bearer "):
            raise ApiError(401, "unauthorized", "missing bearer token")
        return state.worker_for_token(authorization.removeprefix("Bearer ").strip())

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "documents": len(state.documents)}

    @app.get("/tasks/next", response_model=NextTaskResponse)
    def next_task(kind: str, worker_id: str = Depends(worker)):
        if kind == "coarse":
            task = state.next_coarse_task(worker_id)
            return NextTaskResponse(kind=kind, coarse=task)
        if kind == "fine":
            task = state.next_fine_task(worker_id)
            return NextTaskResponse(kind=kind, fine=task)
        raise ApiError(422, "validation", f"unknown task kind {kind!r}")

    @app.post("/judgments", response_model=JudgmentResponse)
    def submit_judgment(body: JudgmentRequest, worker_id: str = Depends(worker)):
        return state.submit_judgment(
            worker_id,
            body.doc_id,
            body.is_single_text_tutorial,
            [tuple(s) for s in body.title_span] if body.title_span else None,
        )

    @app.get("/documents/{doc_id}", response_model=DocumentResponse)
    def get_document(doc_id: str):
        if doc_id not in state.documents:
            raise ApiError(404, "unknown_document", f"no document {doc_id!r}")
        doc = state.documents.get(doc_id)
        return DocumentResponse(
            id=doc.id,
            url=doc.url,
            domain=doc.domain,
            title_guess=doc.title_guess,
            clean_text=doc.clean_text,
        )

    @app.get("/documents/{doc_id}/raw")
    def get_document_raw(doc_id: str):
        if doc_id not in state.documents:
            raise ApiError(404, "unknown_document", f"no document {doc_id!r}")
        doc = state.documents.get(doc_id, load_html=True)
        return Response(content=doc.raw_html, media_type="text/html")

    @app.get("/documents/{doc_id}/sentences", response_model=list[SentenceRow])
    def get_document_sentences(doc_id: str):
        if doc_id not in state.documents:
            raise ApiError(404, "unknown_document", f"no document {doc_id!r}")
        return [
            SentenceRow(index=s.index, char_start=s.char_start, char_end=s.char_end)
            for s in state._sentences(doc_id)
        ]

    @app.get("/commands", response_model=list[CommandRow])
    def get_commands():
        return state.command_vocabulary()

    @app.get("/sessions/{session_id}", response_model=SessionStateResponse)
    def get_session(session_id: str, worker_id: str = Depends(worker)):
        return state.get_session(session_id).public_state()

    @app.post("/sessions/{session_id}/advance", response_model=SessionStateResponse)
    def advance(session_id: str, body: AdvanceRequest, worker_id: str = Depends(worker)):
        return state.advance_session(
            worker_id, session_id, body.expected_version, body.step, body.payload()
        )

    @app.post("/export", response_model=ExportResponse)
    def export(body: ExportRequest, worker_id: str = Depends(worker)):
        if not state.finalized:
            raise ApiError(409, "no_records", "no finalized records to export")
        documents = {
            doc_id: state.documents.get(doc_id)
            for doc_id in {r.tutorial_id for r in state.finalized}
        }
        manifest = export_datasets(
            state.finalized,
            documents,
            body.out_dir,
            seed=body.seed,
            min_label_count=body.min_label_count,
        )
        return ExportResponse(**{k: manifest[k] for k in ExportResponse.model_fields})
    return app

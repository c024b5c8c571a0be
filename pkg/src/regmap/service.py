"""HTTP/JSON API over the engine: ingestion, mapping, feedback, reports.

All endpoints live under /v1. Errors come back as {code, message,
details}. Writes can be gated behind a single static bearer token; reads
stay open. Feedback is durably logged before the 200 goes out, and any
retrain it triggers runs on the engine's background worker so mapping
queries never wait on training.
"""

from __future__ import annotations

from fastapi import Depends, FastAPI, Header, HTTPException, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .engine import Engine, RegulationExistsError
from .errors import (
    DuplicateControlIdError,
    DuplicateFeedbackIdError,
    InvalidFeedbackError,
    MissingFieldError,
    ParseError,
    RegmapError,
    UnknownLabelError,
    UnknownRegulationError,
)
from .feedback import FeedbackRecord
from .hybrid import MappingQuery

_STATUS_BY_ERROR = (
    (UnknownRegulationError, 404),
    (RegulationExistsError, 409),
    (DuplicateFeedbackIdError, 409),
    (InvalidFeedbackError, 422),
    (UnknownLabelError, 400),
    (DuplicateControlIdError, 400),
    (MissingFieldError, 400),
    (ParseError, 400),
)


class CatalogIngestRequest(BaseModel):
    regulation_id: str
    content: str
    format: str = "jsonl"
    replace: bool = False


class MapRequest(BaseModel):
    text: str
    regulation_id: str
    threshold: float | None = None
    max_hits: int = Field(default=20, ge=1)


class FeedbackRequest(BaseModel):
    regulation_id: str
    feedback_id: str
    check_text: str
    accepted: list[str] = Field(default_factory=list)
    rejected: list[str] = Field(default_factory=list)
    author: str = ""
    submitted_at: str = ""


def _error_response(exc: RegmapError) -> JSONResponse:
    status = 400
    for err_type, code in _STATUS_BY_ERROR:
        if isinstance(exc, err_type):
            status = code
            break
    return JSONResponse(
        status_code=status,
        content={
            "code": type(exc).__name__,
            "message": str(exc),
            "details": {"line": exc.line_no} if isinstance(exc, ParseError) else {},
        },
    )


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="regmap", version="1.0")
    app.state.engine = engine

    def require_token(authorization: str | None = Header(default=None)) -> None:
        token = engine.config.auth_token
        if token is None:
            return
        if authorization != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    @app.exception_handler(RegmapError)
    async def handle_domain_error(request: Request, exc: RegmapError):
        return _error_response(exc)

    @app.post("/v1/catalogs")
    def ingest_catalog(body: CatalogIngestRequest, _=Depends(require_token)):
        if body.format not in ("jsonl", "csv"):
            raise HTTPException(status_code=422, detail="format must be jsonl or csv")
        return engine.ingest_catalog(
            body.regulation_id, body.content, body.format, replace_existing=body.replace
        )

    @app.post("/v1/map")
    def map_text(body: MapRequest):
        threshold = (
            body.threshold if body.threshold is not None else engine.config.default_threshold
        )
        try:
            query = MappingQuery(
                text=body.text,
                regulation_id=body.regulation_id,
                threshold=threshold,
                max_hits=body.max_hits,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return engine.map_query(query).to_json_dict()

    @app.post("/v1/feedback")
    def post_feedback(body: FeedbackRequest, _=Depends(require_token)):
        record = FeedbackRecord(
            feedback_id=body.feedback_id,
            check_text=body.check_text,
            accepted=frozenset(body.accepted),
            rejected=frozenset(body.rejected),
            submitted_at=body.submitted_at,
            author=body.author,
        )
        return engine.submit_feedback(body.regulation_id, record)

    @app.get("/v1/coverage")
    def get_coverage(regulation: str = Query(...)):
        return engine.coverage(regulation).to_json_dict()

    @app.get("/v1/status")
    def get_status():
        return engine.status().to_json_dict()

    @app.get("/v1/metrics")
    def get_metrics(experiment: str = Query(...)):
        try:
            return engine.stored_report(experiment)
        except RegmapError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    return app

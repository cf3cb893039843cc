"""HTTP service: fit once per session, answer effect queries live.

The request path mirrors the library exactly — session creation runs the
load/matrix/compress/fit pipeline synchronously, and the effects endpoint
calls the same query code the CLI uses, so responses are bitwise identical
to direct library calls. Nothing beyond the fitted model (and its covariance
cache) is precomputed or memoized.
"""

from __future__ import annotations

import os
import time

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..covariance import CovarianceType
from ..effects import EffectQuery
from ..errors import (
    DataError,
    GroupKeyError,
    LmfxError,
    RankError,
    SpecError,
)
from ..design import spec_from_dict
from ..pipeline import analyze_file
from .schemas import (
    Diagnostics,
    Effect,
    EffectsResponse,
    ErrorBody,
    ErrorResponse,
    HealthResponse,
    QueryEcho,
    SessionCreated,
    SessionCreateRequest,
    SessionDetail,
    SessionList,
    SessionSummary,
)
from .sessions import CapacityError, Session, SessionStore

DEFAULT_MAX_SESSIONS = 16
DEFAULT_MAX_ROWS = 50_000_000


def _status_for(exc: LmfxError) -> int:
    if isinstance(exc, RankError):
        return 422
    if isinstance(exc, GroupKeyError):
        return 409
    if isinstance(exc, CapacityError):
        return 429
    if isinstance(exc, DataError):
        # Missing resources (file paths, session ids) are 404; malformed
        # data and unknown columns are the client's 400.
        return 404 if "not found" in str(exc) else 400
    return 400


def _error_response(exc: LmfxError, status: int | None = None) -> JSONResponse:
    body = ErrorResponse(
        error=ErrorBody(
            type=type(exc).__name__,
            message=str(exc),
            column=getattr(exc, "column_label", None),
            term_index=getattr(exc, "term_index", None),
        )
    )
    return JSONResponse(
        status_code=status if status is not None else _status_for(exc),
        content=body.model_dump(),
    )


def _diagnostics(session: Session) -> Diagnostics:
    d = session.analysis.diagnostics()
    return Diagnostics(created_at=session.created_at_iso(), **d)


def create_app(
    max_sessions: int | None = None,
    max_rows: int | None = None,
) -> FastAPI:
    """Build the service; limits fall back to LMFX_MAX_SESSIONS / LMFX_MAX_ROWS."""
    if max_sessions is None:
        max_sessions = int(os.environ.get("LMFX_MAX_SESSIONS", DEFAULT_MAX_SESSIONS))
    if max_rows is None:
        max_rows = int(os.environ.get("LMFX_MAX_ROWS", DEFAULT_MAX_ROWS))

    app = FastAPI(title="lmfx", version="1", docs_url="/docs")
    # The dashboard is served from its own origin and only reads; writes
    # (session create/delete) stay same-origin / CLI-only.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET"],
        allow_headers=["*"],
    )
    store = SessionStore(max_sessions=max_sessions)
    app.state.store = store
    app.state.max_rows = max_rows

    @app.exception_handler(LmfxError)
    async def _lmfx_error(request: Request, exc: LmfxError):
        return _error_response(exc)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        loc = ".".join(str(part) for part in first.get("loc", ()))
        message = f"invalid request: {first.get('msg', 'validation failed')}"
        if loc:
            message += f" at {loc}"
        return _error_response(SpecError(message), status=400)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse()

    @app.post("/sessions", response_model=SessionCreated, status_code=201)
    def create_session(body: SessionCreateRequest) -> SessionCreated:
        spec = spec_from_dict(body.spec)
        store.reserve()
        analysis = analyze_file(
            body.data_path,
            spec,
            extra_keys=tuple(body.compression_keys),
            compression=body.compression,
            schema_overrides=body.columns,
        )
        if analysis.compressed.n > max_rows:
            raise DataError(
                f"dataset has {analysis.compressed.n} rows; "
                f"server limit is {max_rows}"
            )
        session = store.add(analysis)
        return SessionCreated(
            session_id=session.id, diagnostics=_diagnostics(session)
        )

    @app.get("/sessions", response_model=SessionList)
    def list_sessions() -> SessionList:
        out = []
        for s in store.list():
            d = s.analysis.diagnostics()
            out.append(
                SessionSummary(
                    session_id=s.id,
                    created_at=s.created_at_iso(),
                    n=d["n"],
                    p=d["p"],
                    groups=d["groups"],
                    compression_ratio=d["compression_ratio"],
                    fit_seconds=d["timings"].get("fit", 0.0),
                    fit_count=d["fit_count"],
                )
            )
        return SessionList(sessions=out)

    def _require(session_id: str) -> Session:
        session = store.get(session_id)
        if session is None:
            raise DataError(f"session not found: {session_id}")
        return session

    @app.get("/sessions/{session_id}", response_model=SessionDetail)
    def get_session(session_id: str) -> SessionDetail:
        session = _require(session_id)
        return SessionDetail(
            session_id=session.id, diagnostics=_diagnostics(session)
        )

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str) -> None:
        if not store.delete(session_id):
            raise DataError(f"session not found: {session_id}")

    @app.get("/sessions/{session_id}/effects", response_model=EffectsResponse)
    def effects(
        session_id: str,
        outcome: str,
        arm: str,
        group_by: list[str] = Query(default=[]),
        covariance: str = "homoskedastic",
        level: float = 0.95,
    ) -> EffectsResponse:
        session = _require(session_id)
        analysis = session.analysis
        grouping: list[str] = []
        for chunk in group_by:
            grouping.extend(g for g in chunk.split(",") if g)
        # Names missing from the source data entirely are the client's 400;
        # real columns that were not compression keys fall through to the
        # engine's GroupKeyError, the remediable 409.
        known = set(analysis.dataset.columns).union(analysis.source_columns)
        for g in grouping:
            if g not in known:
                raise SpecError(f"unknown grouping column {g!r}")
        query = EffectQuery(
            outcome=outcome,
            arm=arm,
            grouping=tuple(grouping),
            covariance=CovarianceType.parse(covariance),
            confidence_level=level,
        )
        t0 = time.perf_counter()
        cells = analysis.query(query)
        elapsed = time.perf_counter() - t0
        return EffectsResponse(
            session_id=session.id,
            query=QueryEcho(
                outcome=query.outcome,
                arm=query.arm,
                group_by=list(query.grouping),
                covariance=query.covariance.value,
                confidence_level=query.confidence_level,
            ),
            effects=[Effect.from_estimate(c) for c in cells],
            elapsed_seconds=elapsed,
        )

    return app

"""FastAPI application exposing the analysis operations over HTTP.

Domain failures map to structured error bodies: configuration problems and
bad data come back as 400 with a ``kind`` the client can branch on, and
degenerate-sample aborts as 409.
"""

from __future__ import annotations

import json
from importlib import resources

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..analysis import ConfigError
from ..bootstrap import ResampleDegeneracyError
from ..dataset import CsvError, UnknownColumn
from ..hypotheses import PredicateError
from ..ols import DegenerateDesign, UnknownTerm
from . import handlers
from .handlers import error_kind
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    CoverageRequest,
    CoverageResponse,
    CurvesRequest,
    HealthResponse,
    SynthRequest,
    TableResponse,
)


def report_schema() -> dict:
    text = resources.files("shapeboot").joinpath("report.schema.json").read_text()
    return json.loads(text)


def create_app() -> FastAPI:
    app = FastAPI(title="shapeboot", version=__version__)

    def _error_response(status: int, exc: Exception) -> JSONResponse:
        body = {"kind": error_kind(exc), "message": str(exc)}
        if isinstance(exc, PredicateError):
            body["position"] = exc.position
        return JSONResponse(status_code=status, content={"error": body})

    @app.exception_handler(ConfigError)
    @app.exception_handler(PredicateError)
    @app.exception_handler(UnknownTerm)
    async def _config_error(request: Request, exc: Exception):
        return _error_response(400, exc)

    @app.exception_handler(CsvError)
    @app.exception_handler(UnknownColumn)
    @app.exception_handler(FileNotFoundError)
    @app.exception_handler(IsADirectoryError)
    async def _data_error(request: Request, exc: Exception):
        return _error_response(400, exc)

    @app.exception_handler(DegenerateDesign)
    @app.exception_handler(ResampleDegeneracyError)
    async def _degenerate_error(request: Request, exc: Exception):
        return _error_response(409, exc)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/report-schema")
    def get_report_schema() -> dict:
        return report_schema()

    @app.post("/analyze", response_model=AnalyzeResponse)
    def analyze(req: AnalyzeRequest) -> AnalyzeResponse:
        return handlers.handle_analyze(req)

    @app.post("/curves", response_model=TableResponse)
    def curves(req: CurvesRequest) -> TableResponse:
        return handlers.handle_curves(req)

    @app.post("/synth", response_model=TableResponse)
    def synth(req: SynthRequest) -> TableResponse:
        return handlers.handle_synth(req)

    @app.post("/coverage", response_model=CoverageResponse)
    def coverage(req: CoverageRequest) -> CoverageResponse:
        return handlers.handle_coverage(req)

    return app


app = create_app()

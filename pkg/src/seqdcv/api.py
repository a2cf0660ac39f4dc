"""HTTP service over the command implementations in ``service``.

Errors come back as ``{"kind": "input" | "numerical", "detail": ...}`` with
status 400 (bad input) or 422 (numerical failure).  Serve with
``uvicorn seqdcv.api:app``.
"""
from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from . import harness, io, service
from .errors import InputError, SeqDCVError

app = FastAPI(title="seqdcv", version=io.SPEC_VERSION)

ScenarioName = Literal["1a", "1b", "1c", "1d", "2a", "2b", "2c"]
StrategyLabel = Literal["CV_D/lambda_opt", "CV_D/lambda_1se", "CV_S/lambda_opt"]


class SimulateRequest(BaseModel):
    scenario: ScenarioName
    seed: int = Field(0, ge=0)
    out: str
    n: Optional[int] = Field(None, ge=10)
    p: Optional[int] = Field(None, ge=1)
    q: Optional[int] = Field(None, ge=1)
    noise_sd: Optional[float] = Field(None, gt=0)
    precision: Optional[int] = Field(None, ge=1, le=17)


class _CvFields(BaseModel):
    alpha: float = Field(0.0, ge=0.0, le=1.0)
    strategy: Literal["double", "single"] = "double"
    rule: Literal["opt", "one_se"] = "opt"
    J: int = Field(5, ge=2)
    K: int = Field(5, ge=2)
    seed: int = Field(0, ge=0)


class AssessRequest(_CvFields):
    x1: str
    x2: str
    y: str
    alpha2: Optional[float] = Field(None, ge=0.0, le=1.0)
    perms: int = Field(0, ge=0)
    log_y: bool = False
    reverse: bool = False
    statistic: Literal["q2_cond", "gain"] = "q2_cond"
    smooth: bool = False


class StackRequest(_CvFields):
    x1: str
    x2: str
    y: str
    log_y: bool = False
    scale: bool = True


class MonteCarloRequest(BaseModel):
    scenario: ScenarioName
    trials: int = Field(harness.DESK_TRIALS, ge=1)
    perms: int = Field(harness.DESK_PERMUTATIONS, ge=0)
    alpha: float = Field(0.0, ge=0.0, le=1.0)
    strategies: list[StrategyLabel] = Field(default_factory=lambda: ["CV_D/lambda_opt"],
                                            min_length=1)
    seed: int = Field(0, ge=0)
    n: Optional[int] = Field(None, ge=10)
    p: Optional[int] = Field(None, ge=1)
    q: Optional[int] = Field(None, ge=1)
    noise_sd: Optional[float] = Field(None, gt=0)
    full_scale: bool = False


class ReportRequest(BaseModel):
    reports: list[dict] = Field(min_length=1)
    format: Literal["csv", "json"] = "json"


class RerunRequest(BaseModel):
    report: dict


class ErrorResponse(BaseModel):
    kind: Literal["input", "numerical"]
    detail: str


def _error(status: int, kind: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"kind": kind, "detail": detail})


@app.exception_handler(RequestValidationError)
async def _on_validation(request: Request, exc: RequestValidationError):
    parts = ["{}: {}".format(".".join(str(x) for x in e["loc"][1:]) or "body", e["msg"])
             for e in exc.errors()]
    return _error(400, "input", "; ".join(parts))


@app.exception_handler(InputError)
async def _on_input(request: Request, exc: InputError):
    return _error(400, "input", str(exc))


@app.exception_handler(SeqDCVError)
async def _on_numerical(request: Request, exc: SeqDCVError):
    return _error(422, "numerical", f"{type(exc).__name__}: {exc}")


@app.exception_handler(np.linalg.LinAlgError)
async def _on_linalg(request: Request, exc: np.linalg.LinAlgError):
    return _error(422, "numerical", f"LinAlgError: {exc}")


_ERRORS = {400: {"model": ErrorResponse}, 422: {"model": ErrorResponse}}


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "spec_version": io.SPEC_VERSION}


@app.post("/simulate", responses=_ERRORS)
def simulate(req: SimulateRequest) -> dict:
    return io.jsonable(service.simulate(service.SimulateConfig(**req.model_dump())))


@app.post("/assess", responses=_ERRORS)
def assess(req: AssessRequest) -> dict:
    return io.jsonable(service.assess(service.AssessConfig(**req.model_dump())))


@app.post("/stack-assess", responses=_ERRORS)
def stack_assess(req: StackRequest) -> dict:
    return io.jsonable(service.stack_assess(service.StackConfig(**req.model_dump())))


@app.post("/montecarlo", responses=_ERRORS)
def montecarlo(req: MonteCarloRequest) -> dict:
    return io.jsonable(service.montecarlo(service.MonteCarloConfig(**req.model_dump())))


@app.post("/report", responses=_ERRORS, response_class=PlainTextResponse)
def report(req: ReportRequest) -> str:
    return service.report(req.reports, req.format)


@app.post("/rerun", responses=_ERRORS)
def rerun(req: RerunRequest) -> dict:
    return io.jsonable(service.rerun(req.report))

"""Pydantic request and response models for the analysis service.

Requests carry either a server-side CSV path or the CSV text inline, so
remote clients can ship their data in the request body.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator


class DataSource(BaseModel):
    path: Optional[str] = None
    csv_text: Optional[str] = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.path is None) == (self.csv_text is None):
            raise ValueError("provide exactly one of 'path' or 'csv_text'")
        return self


class ModelSpecBody(BaseModel):
    response: str
    focal: str
    degree: int = 2
    controls: list[str] = Field(default_factory=list)


class ResamplePlanBody(BaseModel):
    b: int = 1000
    seed: int = 0
    max_redraws_per_replicate: int = 100


class HypothesisBody(BaseModel):
    name: str
    predicate: Optional[str] = None  # omitted -> built-in name lookup


class CiTargetBody(BaseModel):
    coefficient: str
    level: float = 0.95


class DirectionalBody(BaseModel):
    coefficient: str
    direction: Literal["negative", "positive"]


class AnalyzeRequest(BaseModel):
    data: DataSource
    model: ModelSpecBody
    plan: ResamplePlanBody = Field(default_factory=ResamplePlanBody)
    hypotheses: Optional[list[HypothesisBody]] = None  # None -> default set
    ci: list[CiTargetBody] = Field(default_factory=list)
    ci_level: float = 0.95
    directional: list[DirectionalBody] = Field(default_factory=list)
    adjust: Optional[dict[str, float]] = None
    workers: Optional[int] = None


class AnalyzeResponse(BaseModel):
    report: dict


class GridBody(BaseModel):
    lo: float
    hi: float
    step: float


class CurvesRequest(BaseModel):
    data: DataSource
    model: ModelSpecBody
    plan: ResamplePlanBody = Field(default_factory=ResamplePlanBody)
    grid: GridBody
    spaghetti: int = 3
    adjust: Optional[dict[str, float]] = None


class TableResponse(BaseModel):
    """A numeric table, column-named; renders losslessly to CSV."""

    header: list[str]
    rows: list[list[float]]


class SynthRequest(BaseModel):
    n: int
    beta0: float
    beta1: float
    beta2: float
    noise_sd: float
    x_lo: float = 0.0
    x_hi: float = 30.0
    gammas: list[float] = Field(default_factory=list)
    control_means: list[float] = Field(default_factory=list)
    control_sds: list[float] = Field(default_factory=list)
    response_name: str = "y"
    focal_name: str = "x"
    control_names: list[str] = Field(default_factory=list)
    seed: int = 0


class CoverageRequest(BaseModel):
    population: SynthRequest  # its seed field is ignored; the study seed rules
    reps: int = 200
    level: float = 0.95
    b: int = 500
    seed: int = 0
    workers: Optional[int] = None


class MethodCoverage(BaseModel):
    covered: int
    coverage: float


class CoverageResponse(BaseModel):
    reps: int
    level: float
    b: int
    seed: int
    true_curvature: float
    classical: MethodCoverage
    percentile: MethodCoverage


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorBody(BaseModel):
    kind: Literal["config", "data", "degenerate"]
    message: str
    position: Optional[int] = None

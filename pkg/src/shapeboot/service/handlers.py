"""Request-model handlers shared by the HTTP endpoints and the CLI.

The CLI dispatches to these directly when no server is configured, so the
service layer is the single place requests are interpreted.
"""

from __future__ import annotations

from .. import bootstrap as bt
from .. import synth as sy
from ..analysis import (
    CiTarget,
    ConfigError,
    CurveGrid,
    DirectionalTarget,
    analyze_dataset,
    emit_curves,
    resolve_hypotheses,
)
from ..bootstrap import ResampleDegeneracyError
from ..dataset import CsvError, Dataset, UnknownColumn, load_csv, loads_csv
from ..ols import DegenerateDesign, ModelSpec
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    CoverageRequest,
    CoverageResponse,
    CurvesRequest,
    SynthRequest,
    TableResponse,
)


_DATA_ERRORS = (CsvError, UnknownColumn, FileNotFoundError, IsADirectoryError)
_DEGENERATE_ERRORS = (DegenerateDesign, ResampleDegeneracyError)


def error_kind(exc: Exception) -> str:
    """Classify a domain exception for error bodies and CLI exit codes."""
    if isinstance(exc, _DEGENERATE_ERRORS):
        return "degenerate"
    if isinstance(exc, _DATA_ERRORS):
        return "data"
    return "config"


def _load_data(source) -> Dataset:
    if source.path is not None:
        return load_csv(source.path)
    return loads_csv(source.csv_text)


def _model_spec(body) -> ModelSpec:
    try:
        return ModelSpec(
            response=body.response,
            focal=body.focal,
            degree=body.degree,
            controls=tuple(body.controls),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _plan(body) -> bt.ResamplePlan:
    try:
        return bt.ResamplePlan(
            b=body.b, seed=body.seed, max_redraws_per_replicate=body.max_redraws_per_replicate
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _population(body: SynthRequest) -> sy.SynthPopulation:
    try:
        return sy.SynthPopulation(
            n=body.n,
            beta0=body.beta0,
            beta1=body.beta1,
            beta2=body.beta2,
            noise_sd=body.noise_sd,
            x_lo=body.x_lo,
            x_hi=body.x_hi,
            gammas=tuple(body.gammas),
            control_means=tuple(body.control_means),
            control_sds=tuple(body.control_sds),
            response_name=body.response_name,
            focal_name=body.focal_name,
            control_names=tuple(body.control_names),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _table(ds: Dataset) -> TableResponse:
    names = list(ds.column_names)
    cols = [ds.column(n) for n in names]
    rows = [[float(col[i]) for col in cols] for i in range(ds.n_rows)]
    return TableResponse(header=names, rows=rows)


def handle_analyze(req: AnalyzeRequest) -> AnalyzeResponse:
    ds = _load_data(req.data)
    spec = _model_spec(req.model)
    plan = _plan(req.plan)
    entries = (
        None
        if req.hypotheses is None
        else [(h.name, h.predicate) for h in req.hypotheses]
    )
    hypotheses = resolve_hypotheses(entries, spec)
    report = analyze_dataset(
        ds,
        spec,
        plan,
        hypotheses,
        ci=tuple(CiTarget(t.coefficient, t.level) for t in req.ci),
        ci_level=req.ci_level,
        directional=tuple(
            DirectionalTarget(d.coefficient, d.direction) for d in req.directional
        ),
        adjust=req.adjust,
        workers=req.workers,
    )
    return AnalyzeResponse(report=report)


def handle_curves(req: CurvesRequest) -> TableResponse:
    ds = _load_data(req.data)
    spec = _model_spec(req.model)
    plan = _plan(req.plan)
    grid = CurveGrid(req.grid.lo, req.grid.hi, req.grid.step)
    table = emit_curves(ds, spec, plan, grid, spaghetti=req.spaghetti, adjust=req.adjust)
    return _table(table)


def handle_synth(req: SynthRequest) -> TableResponse:
    pop = _population(req)
    return _table(sy.synth_generate(pop, seed=req.seed))


def handle_coverage(req: CoverageRequest) -> CoverageResponse:
    pop = _population(req.population)
    try:
        result = sy.coverage_study(
            pop, reps=req.reps, level=req.level, b=req.b, seed=req.seed, workers=req.workers
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return CoverageResponse(**result)

"""End-to-end analyses: full-sample fit, bootstrap, and report assembly.

Reports are plain dicts with a fixed key order and only finite numbers (or
null), so ``render_report_json`` is byte-stable: identical configuration and
seed always produce identical JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import bootstrap as bt
from .dataset import Dataset, load_csv
from .hypotheses import (
    Hypothesis,
    ModelContext,
    PredicateError,
    default_hypotheses,
    make_hypothesis,
    predicted,
    validate_predicate,
)
from .ols import (
    ModelSpec,
    UnknownTerm,
    classical_ci,
    coef_p_value,
    fit_design,
    build_design,
    p_to_confidence,
)

REPORT_SCHEMA_VERSION = 1


class ConfigError(Exception):
    """An analysis configuration that cannot be run as given."""


@dataclass(frozen=True)
class CiTarget:
    coefficient: str
    level: float = 0.95


@dataclass(frozen=True)
class DirectionalTarget:
    """A sign hypothesis on one coefficient, scored from its p-value."""

    coefficient: str
    direction: str  # "negative" or "positive"

    def sign(self) -> int:
        if self.direction == "negative":
            return -1
        if self.direction == "positive":
            return 1
        raise ConfigError(f"direction must be 'negative' or 'positive', got {self.direction!r}")


@dataclass(frozen=True)
class CurveGrid:
    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if not (self.step > 0 and self.lo < self.hi):
            raise ConfigError("curve grid needs lo < hi and step > 0")

    def values(self) -> np.ndarray:
        count = int(math.floor((self.hi - self.lo) / self.step + 1e-9)) + 1
        return self.lo + self.step * np.arange(count)


@dataclass
class AnalysisConfig:
    """Everything one analysis needs; mirrors the CLI flags one-for-one."""

    data_path: str
    response: str
    focal: str
    degree: int = 2
    controls: tuple[str, ...] = ()
    b: int = 1000
    seed: int = 0
    max_redraws: int = 100
    hypotheses: list[tuple[str, str | None]] | None = None  # None -> defaults
    ci: tuple[CiTarget, ...] = ()
    ci_level: float = 0.95
    directional: tuple[DirectionalTarget, ...] = ()
    adjust: dict[str, float] | None = None
    workers: int | None = None
    curve_grid: CurveGrid | None = None
    spaghetti: int = 3
    output_format: str = "json"

    def model_spec(self) -> ModelSpec:
        try:
            return ModelSpec(
                response=self.response,
                focal=self.focal,
                degree=self.degree,
                controls=tuple(self.controls),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def plan(self) -> bt.ResamplePlan:
        try:
            return bt.ResamplePlan(
                b=self.b, seed=self.seed, max_redraws_per_replicate=self.max_redraws
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def resolve_hypotheses(entries, spec: ModelSpec) -> tuple[Hypothesis, ...]:
    """Turn (name, predicate-or-None) pairs into validated hypotheses.

    ``entries=None`` selects the default set for quadratic and higher models;
    linear models get none (their shape claims live in directional targets).
    """
    if entries is None:
        resolved = default_hypotheses() if spec.degree >= 2 else ()
    else:
        try:
            resolved = tuple(make_hypothesis(name, text) for name, text in entries)
        except (PredicateError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    for h in resolved:
        try:
            validate_predicate(h.expr, spec)
        except PredicateError as exc:
            raise ConfigError(f"hypothesis {h.name!r}: {exc}") from None
    names = [h.name for h in resolved]
    if len(set(names)) != len(names):
        raise ConfigError("hypothesis names must be unique")
    return resolved


def resolve_adjustment(ds: Dataset, spec: ModelSpec, adjust: dict[str, float] | None):
    """Control values predictions are adjusted to: sample means unless given."""
    if adjust is None:
        return ds.column_means(spec.controls), "column_means"
    unknown = set(adjust) - set(spec.controls)
    if unknown:
        raise ConfigError(f"adjustment names not among controls: {sorted(unknown)}")
    means = ds.column_means(spec.controls)
    values = np.array(
        [adjust.get(name, float(means[k])) for k, name in enumerate(spec.controls)]
    )
    return values, "user"


def _bootstrap_interval(column: np.ndarray, level: float) -> tuple[float, float]:
    if column.size == 1:
        value = bt.percentile(column, 0.5)
        return (value, value)
    return bt.percentile_ci(column, level)


def _finite_or_none(value: float | None):
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def analyze_dataset(
    ds: Dataset,
    spec: ModelSpec,
    plan: bt.ResamplePlan,
    hypotheses: tuple[Hypothesis, ...] = (),
    ci: tuple[CiTarget, ...] = (),
    ci_level: float = 0.95,
    directional: tuple[DirectionalTarget, ...] = (),
    adjust: dict[str, float] | None = None,
    workers: int | None = None,
) -> dict:
    """Fit the full sample, bootstrap it, and assemble the report dict."""
    terms = spec.term_names()
    levels = {}
    for target in ci:
        try:
            j = spec.coef_index(target.coefficient)
        except UnknownTerm as exc:
            raise ConfigError(str(exc)) from None
        if not 0.0 < target.level < 1.0:
            raise ConfigError("confidence level must lie strictly between 0 and 1")
        levels[j] = target.level
    if not 0.0 < ci_level < 1.0:
        raise ConfigError("confidence level must lie strictly between 0 and 1")

    adjustment, adjustment_source = resolve_adjustment(ds, spec, adjust)
    full_fit = fit_design(build_design(ds, spec))
    result = bt.run(ds, spec, plan, hypotheses, adjustment=adjustment, workers=workers)

    coefficients = []
    for j, name in enumerate(terms):
        estimate = float(full_fit.coefficients[j])
        se = full_fit.std_error(j)
        level = levels.get(j, ci_level)
        classical = classical_ci(full_fit, j, level)
        boot = _bootstrap_interval(result.coefficients[:, j], level)
        classical_width = classical[1] - classical[0]
        ratio = (
            bt.width_ratio(boot, classical) if classical_width > 0 else None
        )
        coefficients.append(
            {
                "name": name,
                "estimate": estimate,
                "se": se,
                "t": _finite_or_none(estimate / se) if se > 0 else None,
                "p": coef_p_value(full_fit, j) if se > 0 else (1.0 if estimate == 0 else 0.0),
                "ci_level": level,
                "classical_ci": [classical[0], classical[1]],
                "bootstrap_percentile_ci": [boot[0], boot[1]],
                "width_ratio": _finite_or_none(ratio),
            }
        )

    true_counts = result.hypothesis_true_counts()
    undef_counts = result.hypothesis_undefined_counts()
    hypothesis_rows = []
    for j, h in enumerate(hypotheses):
        hypothesis_rows.append(
            {
                "name": h.name,
                "predicate": h.text,
                "confidence": float(true_counts[j]) / plan.b,
                "true_count": int(true_counts[j]),
                "undefined_count": int(undef_counts[j]),
                "b": plan.b,
                "vertex_bin_upper_exclusive": h.vertex_bin is not None,
            }
        )

    directional_rows = []
    for target in directional:
        try:
            j = spec.coef_index(target.coefficient)
        except UnknownTerm as exc:
            raise ConfigError(str(exc)) from None
        estimate = float(full_fit.coefficients[j])
        sign = 0 if estimate == 0 else (1 if estimate > 0 else -1)
        p = coef_p_value(full_fit, j) if full_fit.std_error(j) > 0 else (
            1.0 if estimate == 0 else 0.0
        )
        directional_rows.append(
            {
                "coefficient": target.coefficient,
                "direction": target.direction,
                "p": p,
                "estimate_sign": sign,
                "confidence": p_to_confidence(p, sign, target.sign()),
            }
        )

    notes = [f"predictions hold controls at {adjustment_source} values"]
    if any(h.vertex_bin is not None for h in hypotheses):
        notes.append(
            "optimum-interval hypotheses require an inverted U (negative curvature, "
            "positive vertex) and count their upper bound exclusively, so adjacent "
            "intervals partition the inverted-U resamples"
        )

    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "model": {
            "response": spec.response,
            "focal": spec.focal,
            "degree": spec.degree,
            "controls": list(spec.controls),
            "terms": list(terms),
            "n": ds.n_rows,
        },
        "resampling": {
            "b": plan.b,
            "seed": plan.seed,
            "max_redraws_per_replicate": plan.max_redraws_per_replicate,
            "degenerate_redraws": result.degenerate_redraws,
        },
        "adjustment": {name: float(adjustment[k]) for k, name in enumerate(spec.controls)},
        "coefficients": coefficients,
        "hypotheses": hypothesis_rows,
        "directional": directional_rows,
        "notes": notes,
    }


def run_analysis(config: AnalysisConfig) -> dict:
    """Load the data named by ``config`` and run the full analysis."""
    ds = load_csv(config.data_path)
    spec = config.model_spec()
    plan = config.plan()
    hypotheses = resolve_hypotheses(config.hypotheses, spec)
    return analyze_dataset(
        ds,
        spec,
        plan,
        hypotheses,
        ci=config.ci,
        ci_level=config.ci_level,
        directional=config.directional,
        adjust=config.adjust,
        workers=config.workers,
    )


def emit_curves(
    ds: Dataset,
    spec: ModelSpec,
    plan: bt.ResamplePlan,
    grid: CurveGrid,
    spaghetti: int = 3,
    adjust: dict[str, float] | None = None,
) -> Dataset:
    """Adjusted prediction curves: the full-sample curve plus the first
    ``spaghetti`` replicate curves, as a plot-ready table."""
    if spaghetti < 0 or spaghetti > plan.b:
        raise ConfigError("spaghetti count must lie between 0 and the replicate count")
    adjustment, _ = resolve_adjustment(ds, spec, adjust)
    xs = grid.values()
    full_ctx = ModelContext(fit_design(build_design(ds, spec)), adjustment)
    columns: dict[str, np.ndarray] = {
        spec.focal: xs,
        "fit": np.array([predicted(full_ctx, float(x)) for x in xs]),
    }
    for i in range(spaghetti):
        replicate_ctx = ModelContext(bt.fit_replicate(ds, spec, plan, i), adjustment)
        columns[f"resample_{i}"] = np.array(
            [predicted(replicate_ctx, float(x)) for x in xs]
        )
    return Dataset.from_columns(columns)


def render_report_json(report: dict) -> str:
    """Canonical JSON text for a report dict; stable byte-for-byte."""
    return json.dumps(report, indent=2, allow_nan=False) + "\n"

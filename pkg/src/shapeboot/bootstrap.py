"""Seeded with-replacement resampling with a per-replicate refit.

Each replicate gets its own random stream derived by counter: the stream key
for replicate ``i`` is the ``i``-th output of a splitmix64 generator started
at the user's seed. Replicates are therefore independent of execution order,
and serial and parallel runs produce identical results. Determinism is
guaranteed for a given seed within this implementation (numpy PCG64 streams),
not across unrelated implementations.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .hypotheses import Hypothesis, ModelContext, evaluate_hypothesis
from .ols import DegenerateDesign, FitResult, ModelSpec, build_design, fit

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

WORKERS_ENV = "SHAPEBOOT_WORKERS"


class ResampleDegeneracyError(Exception):
    """A replicate kept drawing rank-deficient resamples past its redraw budget."""

    def __init__(self, replicate: int, redraws: int):
        self.replicate = replicate
        self.redraws = redraws
        super().__init__(
            f"replicate {replicate} hit {redraws} rank-deficient resamples; "
            "the sample is too degenerate to bootstrap"
        )


@dataclass(frozen=True)
class ResamplePlan:
    """How many resamples to draw and from which seed."""

    b: int
    seed: int = 0
    max_redraws_per_replicate: int = 100

    def __post_init__(self):
        if self.b < 1:
            raise ValueError("need at least one replicate")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.max_redraws_per_replicate < 0:
            raise ValueError("max redraws must be non-negative")


@dataclass(frozen=True)
class BootstrapResult:
    """Per-replicate coefficients and hypothesis outcomes, in replicate order."""

    coefficients: np.ndarray  # (b, p)
    predicate_outcomes: np.ndarray  # (b, H) bool
    vertex_undefined: np.ndarray  # (b, H) bool
    degenerate_redraws: int
    plan: ResamplePlan
    spec: ModelSpec
    hypotheses: tuple[Hypothesis, ...]

    def hypothesis_true_counts(self) -> np.ndarray:
        return self.predicate_outcomes.sum(axis=0)

    def hypothesis_undefined_counts(self) -> np.ndarray:
        return self.vertex_undefined.sum(axis=0)


def stream_key(seed: int, replicate: int) -> int:
    """64-bit stream key: the ``replicate``-th splitmix64 output from ``seed``."""
    state = (seed + (replicate + 1) * _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_stream(seed: int, replicate: int) -> np.random.Generator:
    """Independent, reproducible generator for one replicate."""
    return np.random.Generator(np.random.PCG64(stream_key(seed, replicate)))


def draw_indices(gen: np.random.Generator, n: int) -> np.ndarray:
    """n uniform draws from 0..n-1 with replacement: one resample's rows."""
    if n < 1:
        raise ValueError("sample size must be at least 1")
    return gen.integers(0, n, size=n)


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "")
    if value.strip():
        return max(1, int(value))
    return 1


def _fit_resample(matrix, response, spec, gen, max_redraws):
    """Draw indices until the gathered design fits; count the discards."""
    n = response.shape[0]
    redraws = 0
    while True:
        idx = draw_indices(gen, n)
        try:
            return fit(matrix[idx], response[idx], spec), redraws
        except DegenerateDesign:
            redraws += 1
            if redraws > max_redraws:
                raise


def fit_replicate(ds: Dataset, spec: ModelSpec, plan: ResamplePlan, replicate: int) -> FitResult:
    """Standalone refit of one replicate; equals row ``replicate`` of ``run``."""
    design = build_design(ds, spec)
    gen = derive_stream(plan.seed, replicate)
    try:
        result, _ = _fit_resample(
            design.matrix, design.response, spec, gen, plan.max_redraws_per_replicate
        )
    except DegenerateDesign:
        raise ResampleDegeneracyError(replicate, plan.max_redraws_per_replicate + 1) from None
    return result


def run(
    ds: Dataset,
    spec: ModelSpec,
    plan: ResamplePlan,
    hypotheses: tuple[Hypothesis, ...] = (),
    adjustment=None,
    workers: int | None = None,
) -> BootstrapResult:
    """Resample, refit, and evaluate every hypothesis on each refit.

    Rank-deficient resamples are discarded and redrawn from the same stream
    (the refit has no defined shape to classify); the total discard count is
    reported. A replicate that exhausts its redraw budget aborts the run.
    """
    base = build_design(ds, spec)
    matrix, response = base.matrix, base.response
    hypotheses = tuple(hypotheses)
    adjustment = (
        np.zeros(len(spec.controls)) if adjustment is None else np.asarray(adjustment, float)
    )
    n_workers = default_workers() if workers is None else max(1, int(workers))
    b, p, n_hyp = plan.b, spec.p, len(hypotheses)

    coefficients = np.empty((b, p), dtype=np.float64)
    outcomes = np.zeros((b, n_hyp), dtype=bool)
    undefined = np.zeros((b, n_hyp), dtype=bool)
    redraw_counts = np.zeros(b, dtype=np.int64)

    def one_replicate(i: int):
        gen = derive_stream(plan.seed, i)
        try:
            result, redraws = _fit_resample(
                matrix, response, spec, gen, plan.max_redraws_per_replicate
            )
        except DegenerateDesign:
            raise ResampleDegeneracyError(i, plan.max_redraws_per_replicate + 1) from None
        ctx = ModelContext(result, adjustment)
        flags = [evaluate_hypothesis(h, ctx) for h in hypotheses]
        return i, result.coefficients, flags, redraws

    if n_workers == 1:
        results = map(one_replicate, range(b))
        for i, coefs, flags, redraws in results:
            coefficients[i] = coefs
            redraw_counts[i] = redraws
            for j, (value, undef) in enumerate(flags):
                outcomes[i, j] = value
                undefined[i, j] = undef
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            for i, coefs, flags, redraws in pool.map(one_replicate, range(b)):
                coefficients[i] = coefs
                redraw_counts[i] = redraws
                for j, (value, undef) in enumerate(flags):
                    outcomes[i, j] = value
                    undefined[i, j] = undef

    coefficients.flags.writeable = False
    outcomes.flags.writeable = False
    undefined.flags.writeable = False
    return BootstrapResult(
        coefficients=coefficients,
        predicate_outcomes=outcomes,
        vertex_undefined=undefined,
        degenerate_redraws=int(redraw_counts.sum()),
        plan=plan,
        spec=spec,
        hypotheses=hypotheses,
    )


# --- Percentiles ---------------------------------------------------------------------


def percentile(values, q: float) -> float:
    """Rank-interpolated percentile, computed literally as pinned: with m
    sorted values, h = q (m - 1) + 1 (1-indexed) and the result is
    x_floor(h) + (h - floor(h)) (x_floor(h)+1 - x_floor(h)). q = 0 and q = 1
    give min and max."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("percentile rank must lie in [0, 1]")
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("percentile of an empty vector")
    s = np.sort(v)
    m = s.size
    if m == 1:
        return float(s[0])
    h = q * (m - 1) + 1.0
    i = int(np.floor(h))
    if i >= m:
        return float(s[m - 1])
    return float(s[i - 1] + (h - i) * (s[i] - s[i - 1]))


def percentile_ci(values, level: float = 0.95) -> tuple[float, float]:
    """Interval between the (1-level)/2 and (1+level)/2 percentiles."""
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must lie strictly between 0 and 1")
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ValueError("percentile interval needs at least two values")
    return (percentile(v, (1.0 - level) / 2.0), percentile(v, (1.0 + level) / 2.0))


def width_ratio(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Width of interval ``a`` over width of interval ``b``."""
    wa = a[1] - a[0]
    wb = b[1] - b[0]
    if wa < 0.0 or wb < 0.0:
        raise ValueError("intervals must be ordered (lo, hi)")
    if wb == 0.0:
        raise ValueError("zero-width denominator interval")
    return wa / wb

"""Bootstrap confidence levels for hypotheses about regression model shape.

Resample a dataset with replacement, refit the regression on every resample,
and read off the fraction of refits satisfying a shape predicate (inverted U,
optimum location, negative relationship) as the hypothesis's confidence
level, alongside percentile and classical coefficient intervals.
"""

__version__ = "0.1.0"

from .analysis import (
    AnalysisConfig,
    CiTarget,
    ConfigError,
    CurveGrid,
    DirectionalTarget,
    analyze_dataset,
    emit_curves,
    render_report_json,
    run_analysis,
)
from .bootstrap import (
    BootstrapResult,
    ResampleDegeneracyError,
    ResamplePlan,
    derive_stream,
    draw_indices,
    fit_replicate,
    percentile,
    percentile_ci,
    run,
    stream_key,
    width_ratio,
)
from .dataset import (
    CsvError,
    Dataset,
    IndexView,
    UnknownColumn,
    dumps_csv,
    identity_view,
    load_csv,
    loads_csv,
    write_csv,
)
from .hypotheses import (
    Hypothesis,
    ModelContext,
    PredicateError,
    PredicateLexError,
    PredicateSyntaxError,
    PredicateTypeError,
    VertexUndefined,
    builtin_hypothesis,
    confidence_level,
    curvature,
    default_hypotheses,
    evaluate,
    evaluate_hypothesis,
    inverted_u,
    make_hypothesis,
    negative,
    optimum_in,
    parse,
    predicted,
    to_text,
    validate_predicate,
    vertex,
)
from .ols import (
    DegenerateDesign,
    Design,
    FitResult,
    ModelSpec,
    UnknownTerm,
    build_design,
    classical_ci,
    coef_p_value,
    fit,
    fit_design,
    p_to_confidence,
    reg_inc_beta,
    t_cdf,
    t_quantile,
)
from .synth import SynthPopulation, coverage_study, synth_generate

__all__ = [name for name in dir() if not name.startswith("_")]

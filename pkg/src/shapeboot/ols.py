"""Design matrices and ordinary least squares with classical inference.

Fits go through an orthogonal (QR) factorization rather than the normal
equations: a focal variable and its square are strongly collinear for small
positive values, and forming X'X squares the condition number. Rank
deficiency is detected on the R factor's diagonal with a scale-relative
threshold, so exact duplicates and near-duplicates both trip the same error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

#: R-diagonal entries below this fraction of the largest entry mark rank deficiency.
RANK_RTOL = 1e-10


class DegenerateDesign(Exception):
    """The design matrix is numerically rank deficient; the fit is undefined."""


@dataclass(frozen=True)
class ModelSpec:
    """Which regression to fit: response ~ focal + focal^2 + ... + controls.

    ``degree`` is the highest power of the focal variable (2 gives the
    quadratic shape model, 1 a straight line). Degrees above 2 are accepted
    but warned about, since raw powers condition badly.
    """

    response: str
    focal: str
    degree: int = 2
    controls: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        if self.degree < 1:
            raise ValueError("degree must be at least 1")
        if self.response == self.focal or self.response in self.controls:
            raise ValueError("response column may not appear among the predictors")
        if self.focal in self.controls:
            raise ValueError("focal column may not appear among the controls")
        if len(set(self.controls)) != len(self.controls):
            raise ValueError("control columns must be distinct")
        if self.degree > 2:
            warnings.warn(
                f"degree {self.degree} uses raw powers of the focal variable; "
                "expect poor conditioning",
                stacklevel=2,
            )

    @property
    def p(self) -> int:
        """Number of coefficients: intercept + degree focal powers + controls."""
        return 1 + self.degree + len(self.controls)

    def term_names(self) -> tuple[str, ...]:
        powers = [self.focal] + [f"{self.focal}^{d}" for d in range(2, self.degree + 1)]
        return ("intercept", *powers, *self.controls)

    def coef_index(self, key) -> int:
        """Resolve a coefficient reference (integer position or term name)."""
        terms = self.term_names()
        if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
            if 0 <= key < len(terms):
                return int(key)
            raise IndexError(f"coefficient index {key} out of range 0..{len(terms) - 1}")
        try:
            return terms.index(key)
        except ValueError:
            raise UnknownTerm(key, terms) from None

    def curvature_index(self) -> int:
        if self.degree < 2:
            raise ValueError("curvature needs a model of degree 2 or higher")
        return 2  # intercept, focal, focal^2, ...


class UnknownTerm(LookupError):
    def __init__(self, key, terms):
        self.key = key
        self.terms = tuple(terms)
        super().__init__(f"unknown coefficient {key!r}; terms are: {', '.join(self.terms)}")


@dataclass(frozen=True)
class Design:
    """A realized design matrix with its response vector.

    Columns are [1, x, x^2, ..., x^degree, controls...] in that fixed order.
    ``rank`` is the numerical rank; construction fails with DegenerateDesign
    when it is below the number of columns.
    """

    matrix: np.ndarray
    response: np.ndarray
    spec: ModelSpec
    terms: tuple[str, ...]
    rank: int


def numeric_rank(matrix: np.ndarray) -> int:
    """Rank of a tall matrix, judged from the QR factor's diagonal."""
    r = np.linalg.qr(matrix, mode="r")
    d = np.abs(np.diagonal(r))
    if d.size == 0 or d.max() == 0.0:
        return 0
    return int(np.count_nonzero(d >= RANK_RTOL * d.max()))


def build_design(data, spec: ModelSpec) -> Design:
    """Assemble the design matrix and response for ``spec`` over ``data``.

    ``data`` may be a Dataset or an IndexView; resampled fits read through
    the view's indices. Raises DegenerateDesign when the columns are
    numerically dependent and ValueError when there are too few rows.
    """
    y = np.asarray(data.column(spec.response), dtype=np.float64)
    x = np.asarray(data.column(spec.focal), dtype=np.float64)
    cols = [np.ones_like(x)]
    for d in range(1, spec.degree + 1):
        cols.append(x**d)
    for name in spec.controls:
        cols.append(np.asarray(data.column(name), dtype=np.float64))
    matrix = np.column_stack(cols)
    n, p = matrix.shape
    if n <= p:
        raise ValueError(f"need more rows than coefficients: n={n}, p={p}")
    rank = numeric_rank(matrix)
    if rank < p:
        raise DegenerateDesign(f"design has rank {rank} < {p} columns")
    return Design(matrix=matrix, response=y, spec=spec, terms=spec.term_names(), rank=rank)


@dataclass(frozen=True)
class FitResult:
    """One fitted least-squares model.

    ``covariance`` is sigma^2 (X'X)^-1 computed from the R factor;
    ``residual_variance`` is RSS / (n - p).
    """

    coefficients: np.ndarray
    covariance: np.ndarray
    residual_variance: float
    df: int
    n: int
    spec: ModelSpec | None = None

    @property
    def p(self) -> int:
        return self.coefficients.shape[0]

    def std_error(self, j: int) -> float:
        var = self.covariance[j, j]
        return math.sqrt(var) if var > 0.0 else 0.0


def fit(matrix: np.ndarray, y: np.ndarray, spec: ModelSpec | None = None) -> FitResult:
    """Least squares via QR: minimize ||y - X b||^2.

    Raises DegenerateDesign if the R diagonal reveals rank deficiency and
    ValueError if fewer than p + 1 rows leave no residual degrees of freedom.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = matrix.shape
    df = n - p
    if df < 1:
        raise ValueError(f"no residual degrees of freedom: n={n}, p={p}")
    q, r = np.linalg.qr(matrix)
    d = np.abs(np.diagonal(r))
    if d.max() == 0.0 or d.min() < RANK_RTOL * d.max():
        raise DegenerateDesign(f"design has rank below {p} columns")
    coef = np.linalg.solve(r, q.T @ y)
    resid = y - matrix @ coef
    rss = float(resid @ resid)
    sigma2 = rss / df
    r_inv = np.linalg.inv(r)
    cov = sigma2 * (r_inv @ r_inv.T)
    cov = (cov + cov.T) / 2.0
    coef.flags.writeable = False
    cov.flags.writeable = False
    return FitResult(
        coefficients=coef,
        covariance=cov,
        residual_variance=sigma2,
        df=df,
        n=n,
        spec=spec,
    )


def fit_design(design: Design) -> FitResult:
    return fit(design.matrix, design.response, design.spec)


# --- Student t distribution -------------------------------------------------
#
# CDF through the regularized incomplete beta function, evaluated with the
# continued fraction (modified Lentz). Good to well below 1e-10 absolute.


def _beta_cont_frac(a: float, b: float, x: float) -> float:
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b) for a, b > 0."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cont_frac(a, b, x) / a
    return 1.0 - front * _beta_cont_frac(b, a, 1.0 - x) / b


def t_cdf(t: float, df: int) -> float:
    """P(T <= t) for Student's t with ``df`` degrees of freedom."""
    if df < 1:
        raise ValueError("degrees of freedom must be at least 1")
    t = float(t)
    if t == 0.0:
        return 0.5
    tail = 0.5 * reg_inc_beta(df / 2.0, 0.5, df / (df + t * t))
    return tail if t < 0.0 else 1.0 - tail


def t_quantile(prob: float, df: int) -> float:
    """Inverse of ``t_cdf`` in its first argument, by bisection."""
    if not 0.0 < prob < 1.0:
        raise ValueError("probability must lie strictly between 0 and 1")
    if prob == 0.5:
        return 0.0
    if prob < 0.5:
        return -t_quantile(1.0 - prob, df)
    lo, hi = 0.0, 1.0
    while t_cdf(hi, df) < prob:
        lo = hi
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError("t quantile out of range")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if t_cdf(mid, df) < prob:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def classical_ci(result: FitResult, j: int, level: float = 0.95) -> tuple[float, float]:
    """Textbook interval: estimate +/- t((1+level)/2, df) * SE_j."""
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must lie strictly between 0 and 1")
    est = float(result.coefficients[j])
    se = result.std_error(j)
    if se == 0.0:
        return (est, est)
    half = t_quantile((1.0 + level) / 2.0, result.df) * se
    return (est - half, est + half)


def coef_p_value(result: FitResult, j: int) -> float:
    """Two-sided p-value for coefficient ``j`` against zero.

    A zero standard error is degenerate (it happens in zero-residual
    resamples); the p-value is then pinned to 0 or 1 with a warning.
    """
    est = float(result.coefficients[j])
    se = result.std_error(j)
    if se == 0.0:
        warnings.warn("zero standard error; p-value is degenerate", stacklevel=2)
        return 1.0 if est == 0.0 else 0.0
    t = est / se
    return 2.0 * (1.0 - t_cdf(abs(t), result.df))


def p_to_confidence(p: float, estimate_sign: int, hypothesis_sign: int) -> float:
    """Convert a two-sided p-value into a directional confidence level.

    When the estimate falls on the hypothesized side the evidence in its
    favor is 1 - p/2; on the opposite side it is p/2; an exactly zero
    estimate says nothing either way.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p-value must lie in [0, 1]")
    if hypothesis_sign not in (-1, 1):
        raise ValueError("hypothesis sign must be -1 or +1")
    if estimate_sign not in (-1, 0, 1):
        raise ValueError("estimate sign must be -1, 0, or +1")
    if estimate_sign == 0:
        return 0.5
    return 1.0 - p / 2.0 if estimate_sign == hypothesis_sign else p / 2.0

"""Extrapolation metrics, thresholds, and feasible regions along factor slices.

Two metrics classify a candidate prediction point as extrapolation:

* leverage h = x' (X'X)^-1 x for least squares designs, thresholded at a
  multiple of the maximum training leverage (k, default 1: outside the
  furthest hull point) or of the average leverage p/n (l, typically 2 or 3);
* regularized T2 = (x - mean)' sigma^-1 (x - mean) using the shrunk
  covariance, thresholded at the empirical upper control limit
  UCL = mean(T2) + sigma_mult * sd(T2) over the training rows.

Both metrics are quadratics in any single factor's value, so the feasible
stretch of a profile trace is a closed interval obtained exactly from the
quadratic roots; categorical and ordinal factors get a feasible level subset.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import stats
from scipy.linalg import solve_triangular

from .covariance import ShrunkCovariance, shrunk_covariance
from .factors import Continuous, FactorSpace, encode_settings, encoded_layout


class SingularDesignError(ValueError):
    """X'X is not invertible; fit the regularized T2 metric instead."""


# ---------------------------------------------------------------------------
# leverage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaxLeverage:
    """Threshold k * max(h_ii); k = 1 flags points beyond the training hull."""
    k: float = 1.0


@dataclass(frozen=True)
class AverageLeverage:
    """Threshold l * p/n; typical l are 2 and 3."""
    l: float = 2.0


LeverageRule = MaxLeverage | AverageLeverage


@dataclass(frozen=True)
class LeverageModel:
    xtx_inv: np.ndarray
    max_h: float
    avg_h: float
    p: int
    n: int
    rule: LeverageRule

    kind = "leverage"

    @property
    def threshold(self) -> float:
        if isinstance(self.rule, MaxLeverage):
            return self.rule.k * self.max_h
        return self.rule.l * self.avg_h


def fit_leverage_model(design: np.ndarray, rule: LeverageRule = MaxLeverage()) -> LeverageModel:
    """Leverage model from an n x p design matrix (intercept column included)."""
    design = np.asarray(design, dtype=float)
    n, p = design.shape
    xtx = design.T @ design
    try:
        chol = np.linalg.cholesky(xtx)
    except np.linalg.LinAlgError:
        raise SingularDesignError(
            "X'X is singular; leverage is undefined, use the regularized T2 metric")
    inv = solve_triangular(chol.T, solve_triangular(chol, np.eye(p), lower=True), lower=False)
    inv = (inv + inv.T) / 2.0
    h = np.einsum("ij,jk,ik->i", design, inv, design)
    return LeverageModel(inv, float(h.max()), p / n, p, n, rule)


def leverage(model: LeverageModel, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.p,):
        raise ValueError(f"expected a vector of length {model.p}, got shape {x.shape}")
    return float(x @ model.xtx_inv @ x)


def leverage_many(model: LeverageModel, xs: np.ndarray) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    return np.einsum("ij,jk,ik->i", xs, model.xtx_inv, xs)


# ---------------------------------------------------------------------------
# regularized T2
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegT2Model:
    cov: ShrunkCovariance
    t2_train: np.ndarray
    t2_mean: float
    t2_sd: float
    sigma_mult: float
    ucl: float

    kind = "regt2"

    @property
    def threshold(self) -> float:
        return self.ucl


def ucl_from_training(t2_train: np.ndarray, sigma_mult: float = 3.0
                      ) -> tuple[float, float, float]:
    """Empirical control limit: (mean, sd, mean + sigma_mult * sd) of the
    training T2 values, with the sample (n-1) standard deviation."""
    t2_train = np.asarray(t2_train, dtype=float)
    mean = float(t2_train.mean())
    sd = float(t2_train.std(ddof=1))
    return mean, sd, mean + sigma_mult * sd


def fit_regt2_model(m, lam: float | None = None, ddof: int = 0,
                    sigma_mult: float = 3.0) -> RegT2Model:
    """Fit the regularized T2 metric on encoded training data.

    `lam` forces the shrinkage weight (None = analytic), `ddof` picks the
    moment divisor (0 = pair count, the default; 1 = pairs - 1), and
    `sigma_mult` scales the control limit.  Training rows with missing
    cells contribute through their observed coordinates.
    """
    values = m.values if hasattr(m, "values") else np.asarray(m, dtype=float)
    if values.shape[0] < 3:
        raise ValueError(f"need at least 3 training rows, got {values.shape[0]}")
    cov = shrunk_covariance(m, lam=lam, ddof=ddof)
    t2_train = cov.mahalanobis_sq(values)
    t2_mean, t2_sd, ucl = ucl_from_training(t2_train, sigma_mult)
    return RegT2Model(cov, t2_train, t2_mean, t2_sd, sigma_mult, ucl)


def t2(model: RegT2Model, x: np.ndarray) -> float:
    """Regularized T2 of one point; NaN coordinates sit at the training mean."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.cov.p,):
        raise ValueError(f"expected a vector of length {model.cov.p}, got shape {x.shape}")
    if np.isnan(x).all():
        raise ValueError("all coordinates missing; T2 is undefined")
    return float(model.cov.mahalanobis_sq(x))


def t2_many(model: RegT2Model, xs: np.ndarray) -> np.ndarray:
    return np.atleast_1d(model.cov.mahalanobis_sq(np.atleast_2d(xs)))


ExtrapolationModel = LeverageModel | RegT2Model


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtrapolationStatus:
    metric_value: float
    threshold: float
    extrapolated: bool

    def to_json(self, kind: str) -> dict:
        return {"metric": self.metric_value, "threshold": self.threshold,
                "extrapolated": self.extrapolated, "kind": kind}


def classify(metric_value: float, threshold: float) -> ExtrapolationStatus:
    """Strictly above the threshold is extrapolation; the boundary is not,
    so constrained optima sitting exactly on the limit remain reachable."""
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    return ExtrapolationStatus(float(metric_value), float(threshold),
                               bool(metric_value > threshold))


def metric_point(model: ExtrapolationModel, space: FactorSpace,
                 settings: Mapping[str, float | str | None]) -> np.ndarray:
    """Encode factor settings as the vector the metric evaluates."""
    x = encode_settings(space, settings)
    if model.kind == "leverage":
        return np.concatenate([[1.0], x])
    return x


def evaluate(model: ExtrapolationModel, space: FactorSpace,
             settings: Mapping[str, float | str | None]) -> ExtrapolationStatus:
    x = metric_point(model, space, settings)
    value = leverage(model, x) if model.kind == "leverage" else t2(model, x)
    return classify(value, model.threshold)


def evaluate_many(model: ExtrapolationModel, xs: np.ndarray) -> np.ndarray:
    """Metric values for pre-encoded points (intercept included for leverage)."""
    if model.kind == "leverage":
        return leverage_many(model, xs)
    return t2_many(model, xs)


# ---------------------------------------------------------------------------
# feasible regions along one factor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeasibleInterval:
    low: float | None
    high: float | None

    @property
    def empty(self) -> bool:
        return self.low is None

    def contains(self, t: float) -> bool:
        return not self.empty and self.low <= t <= self.high

    def clamp(self, t: float) -> float:
        if self.empty:
            raise ValueError("empty feasible interval")
        return float(min(max(t, self.low), self.high))


@dataclass(frozen=True)
class FeasibleLevels:
    levels: tuple[str, ...]

    @property
    def empty(self) -> bool:
        return not self.levels


def feasible_interval(model: ExtrapolationModel, space: FactorSpace,
                      settings: Mapping[str, float | str | None],
                      factor: str) -> FeasibleInterval | FeasibleLevels:
    """Feasible values of one factor with all the others held at `settings`.

    Both metrics are quadratic in a continuous factor's value, so the set
    {t : metric <= threshold} intersected with the factor's range is a closed
    (possibly empty) interval solved exactly from the quadratic coefficients.
    Categorical and ordinal factors return the feasible subset of levels.
    """
    fdef = space.factor(factor)
    thr = model.threshold
    if not isinstance(fdef.kind, Continuous):
        keep = []
        for lv in fdef.kind.levels:
            probe = dict(settings)
            probe[factor] = lv
            if not evaluate(model, space, probe).extrapolated:
                keep.append(lv)
        return FeasibleLevels(tuple(keep))

    # Column index of the factor inside the encoded (and possibly
    # intercept-prefixed) metric vector.
    offset = 1 if model.kind == "leverage" else 0
    j = offset + [c.factor for c in encoded_layout(space)].index(factor)

    probe = dict(settings)
    probe[factor] = 0.0
    v = metric_point(model, space, probe)      # factor column zeroed
    if model.kind == "leverage":
        d = v
        a = float(model.xtx_inv[j, j])
        b = 2.0 * float(model.xtx_inv[:, j] @ d)
        c0 = float(d @ model.xtx_inv @ d)
    else:
        cov = model.cov
        d = np.where(np.isnan(v - cov.mean), 0.0, v - cov.mean)
        e = np.zeros(len(v))
        e[j] = 1.0
        ze = solve_triangular(cov.chol, e, lower=True)
        zd = solve_triangular(cov.chol, d, lower=True)
        a = float(ze @ ze)
        b = 2.0 * float(ze @ zd)
        c0 = float(zd @ zd)

    lo, hi = fdef.kind.low, fdef.kind.high
    t1, t2_ = _solve_quadratic_leq(a, b, c0 - thr)
    if t1 is None:
        return FeasibleInterval(None, None)
    lo_f, hi_f = max(lo, t1), min(hi, t2_)
    if lo_f > hi_f:
        return FeasibleInterval(None, None)

    # The quadratic roots are exact to rounding, but the ulp of error can
    # leave an endpoint's metric a hair above the threshold through the full
    # evaluation path.  Settle root endpoints inward until they are feasible,
    # so interval membership always implies metric <= threshold.
    def settle(value: float, direction: float) -> float:
        step = max(abs(value), hi - lo) * np.finfo(float).eps
        for _ in range(60):
            probe = dict(settings)
            probe[factor] = value
            if not evaluate(model, space, probe).extrapolated:
                return value
            value += direction * step
            step *= 2.0
        return value

    if lo_f > lo:
        lo_f = settle(lo_f, +1.0)
    if hi_f < hi:
        hi_f = settle(hi_f, -1.0)
    if lo_f > hi_f:
        return FeasibleInterval(None, None)
    return FeasibleInterval(float(lo_f), float(hi_f))


def _solve_quadratic_leq(a: float, b: float, c: float) -> tuple[float | None, float | None]:
    """Solution interval of a t^2 + b t + c <= 0 (None, None when empty).

    a is a diagonal entry of a positive definite matrix in every real case,
    but a ~ 0 falls back to the linear problem for safety.
    """
    if a <= 1e-300:
        if b == 0.0:
            return (-np.inf, np.inf) if c <= 0 else (None, None)
        edge = -c / b
        return (edge, np.inf) if b < 0 else (-np.inf, edge)
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return None, None
    sq = np.sqrt(disc)
    # Citardauq-stable roots
    q = -(b + np.copysign(sq, b)) / 2.0
    r1, r2 = q / a, (c / q if q != 0 else 0.0)
    return (min(r1, r2), max(r1, r2))


# ---------------------------------------------------------------------------
# exact MVN threshold, for comparison with the empirical control limit
# ---------------------------------------------------------------------------

def f_limit(p: int, n: int, alpha: float) -> float:
    """Exact T2 threshold under multivariate normality:
    (n+1)(n-1)p / (n(n-p)) * F_{1-alpha}(p, n-p).  Requires n > p."""
    if n <= p:
        raise ValueError(f"F threshold needs n > p, got n={n}, p={p}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    scale = (n + 1) * (n - 1) * p / (n * (n - p))
    return float(scale * stats.f.ppf(1.0 - alpha, p, n - p))

"""Monte-Carlo study of extrapolation control on low-rank factor data.

Each replicate simulates X = U D + E with U (n x r), D (r x p), and E
(n x p) all i.i.d. standard normal, so rows are multivariate normal with
true covariance D'D + I.  A ray of equally spaced prediction points runs
from the column-mean point to the data-box corner that violates the sign of
the most correlated column pair, and each point gets an oracle label from
the true distribution: extrapolation iff P(chi2_p >= T2_true) < alpha.  The
fitted metric (regularized T2, or Hotelling's T2 through a Moore-Penrose
pseudo-inverse for comparison) then classifies the ray points and fresh
in-distribution draws, giving true and false positive rates per grid rank.

The headline FPR follows the grid-point protocol (oracle-negative ray
points); the flag rate on fresh in-distribution draws is reported
separately as fresh_fpr since the empirical 3-sigma limit is tuned to the
training distribution, not to out-of-sample chi-square tails.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import stats

from .covariance import pairwise_moments
from .extrapolation import fit_regt2_model, t2_many
from .factors import (Categorical, Continuous, Dataset, FactorDef, FactorSpace,
                      encode, level_column, numeric_column)

VARIANTS = ("regularized", "pseudo_inverse")
NOISE_SHAPES = ("matrix", "broadcast")


@dataclass(frozen=True)
class SimulationScenario:
    n: int
    p: int
    r: int
    p_cat: int = 0
    n_grid: int = 20
    replicates: int = 100
    alpha: float = 0.05
    seed: int = 0
    variant: str = "regularized"
    noise: str = "matrix"

    def __post_init__(self):
        if self.r > self.p:
            raise ValueError(f"rank r={self.r} cannot exceed p={self.p}")
        if self.p_cat > self.p:
            raise ValueError(f"p_cat={self.p_cat} cannot exceed p={self.p}")
        if self.replicates < 1:
            raise ValueError("need at least 1 replicate")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.noise not in NOISE_SHAPES:
            raise ValueError(f"noise must be one of {NOISE_SHAPES}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @staticmethod
    def from_json(doc: Mapping) -> "SimulationScenario":
        allowed = set(SimulationScenario.__dataclass_fields__)
        unknown = set(doc) - allowed
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return SimulationScenario(**doc)


def _rng_of(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def simulate_factor_matrix(n: int, p: int, r: int, seed,
                           noise: str = "matrix") -> tuple[np.ndarray, np.ndarray]:
    """Low-rank factor matrix and the true covariance D'D + I of its rows.

    `noise="broadcast"` realizes the noise as a single n x 1 column added to
    every variable; it is exposed for comparison only, and its true row
    covariance D'D + 11' is typically singular, so the chi-square oracle is
    only valid with the default full noise matrix.
    """
    if r > min(n, p):
        raise ValueError(f"rank r={r} must be <= min(n, p)={min(n, p)}")
    rng = _rng_of(seed)
    u = rng.standard_normal((n, r))
    d = rng.standard_normal((r, p))
    if noise == "matrix":
        e = rng.standard_normal((n, p))
        true_sigma = d.T @ d + np.eye(p)
    elif noise == "broadcast":
        e = np.repeat(rng.standard_normal((n, 1)), p, axis=1)
        true_sigma = d.T @ d + np.ones((p, p))
    else:
        raise ValueError(f"noise must be one of {NOISE_SHAPES}")
    return u @ d + e, true_sigma


@dataclass(frozen=True)
class LabeledGrid:
    points: np.ndarray        # (n_grid, p), rank 1 = center, rank n_grid = corner
    labels: np.ndarray        # bool, oracle extrapolation status
    t2_true: np.ndarray
    pair: tuple[int, int]
    chi2_threshold: float


def extrapolation_grid(x: np.ndarray, true_sigma: np.ndarray, n_grid: int = 20,
                       alpha: float = 0.05) -> LabeledGrid:
    """Equally spaced ray from the column means to the sign-violating corner.

    The corner lives in the plane of the most correlated column pair: for a
    positive correlation it combines the maximum of one variable with the
    minimum of the other (and vice versa the maxima for a negative one),
    with every other coordinate at its mean.  Labels come from the true
    distribution: extrapolation iff P(chi2_p >= T2_true) < alpha, with
    T2_true using the true mean 0 and true_sigma.
    """
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    if p < 2:
        raise ValueError("need at least 2 columns to pick a correlated pair")
    mean = x.mean(axis=0)
    z = x - mean
    cov = z.T @ z / n
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    np.fill_diagonal(corr, 0.0)
    k, l = np.unravel_index(np.argmax(np.abs(corr)), corr.shape)

    lo, hi = x.min(axis=0), x.max(axis=0)
    corner = mean.copy()
    if corr[k, l] > 0:
        corner[k], corner[l] = hi[k], lo[l]
    else:
        corner[k], corner[l] = hi[k], hi[l]

    ts = np.linspace(0.0, 1.0, n_grid)
    points = mean + ts[:, None] * (corner - mean)
    t2_true = _true_t2(points, true_sigma)
    threshold = float(stats.chi2.ppf(1.0 - alpha, df=p))
    return LabeledGrid(points, t2_true > threshold, t2_true, (int(k), int(l)), threshold)


def _true_t2(points: np.ndarray, true_sigma: np.ndarray) -> np.ndarray:
    chol = np.linalg.cholesky(true_sigma)
    zs = np.linalg.solve(chol, np.atleast_2d(points).T)
    return (zs ** 2).sum(axis=0)


# ---------------------------------------------------------------------------
# discretization into mixed factor types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Discretization:
    """A mixed-type view of a continuous matrix, reusable for new points."""
    dataset: Dataset
    space: FactorSpace
    cut_points: dict[int, np.ndarray]     # column index -> ascending interior cuts

    def apply(self, points: np.ndarray) -> Dataset:
        """Map continuous points through the same quantile cuts."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        cols = []
        for j, f in enumerate(self.space.factors):
            if j in self.cut_points:
                bins = np.digitize(points[:, j], self.cut_points[j])
                levels = f.kind.levels  # type: ignore[union-attr]
                cols.append(level_column(f.name, [levels[b] for b in bins]))
            else:
                cols.append(numeric_column(f.name, points[:, j]))
        return Dataset(tuple(cols))


def discretize(x: np.ndarray, p_cat: int, seed) -> Discretization:
    """Turn p_cat randomly chosen columns categorical with 2-4 levels cut at
    equally spaced quantiles; the rest stay continuous."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, p = x.shape
    if p_cat > p:
        raise ValueError(f"p_cat={p_cat} cannot exceed p={p}")
    rng = _rng_of(seed)
    chosen = sorted(rng.choice(p, size=p_cat, replace=False).tolist()) if p_cat else []
    cuts: dict[int, np.ndarray] = {}
    for j in chosen:
        n_levels = int(rng.integers(2, 5))
        qs = np.linspace(0.0, 1.0, n_levels + 1)[1:-1]
        cuts[j] = np.quantile(x[:, j], qs)

    factors: list[FactorDef] = []
    cols = []
    for j in range(p):
        name = f"x{j + 1}"
        if j in cuts:
            n_levels = len(cuts[j]) + 1
            levels = tuple(f"q{i + 1}" for i in range(n_levels))
            bins = np.digitize(x[:, j], cuts[j])
            factors.append(FactorDef(name, Categorical(levels)))
            cols.append(level_column(name, [levels[b] for b in bins]))
        else:
            factors.append(FactorDef(name, Continuous(float(x[:, j].min()),
                                                      float(x[:, j].max()))))
            cols.append(numeric_column(name, x[:, j]))
    return Discretization(Dataset(tuple(cols)), FactorSpace(tuple(factors)), cuts)


# ---------------------------------------------------------------------------
# study harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _PinvT2:
    """Hotelling's T2 through the Moore-Penrose inverse of the sample
    covariance; the comparison variant, undefined-covariance pathology
    included on purpose."""
    mean: np.ndarray
    pinv: np.ndarray
    t2_train: np.ndarray
    ucl: float

    def t2(self, points: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(points) - self.mean
        return np.einsum("ij,jk,ik->i", d, self.pinv, d)


def _fit_pinv(values) -> _PinvT2:
    mean, cov, _ = pairwise_moments(values)
    pinv = np.linalg.pinv(cov)
    arr = values.values if hasattr(values, "values") else np.asarray(values, dtype=float)
    arr = np.where(np.isnan(arr), mean, arr)
    d = arr - mean
    t2_train = np.einsum("ij,jk,ik->i", d, pinv, d)
    ucl = float(t2_train.mean() + 3.0 * t2_train.std(ddof=1))
    return _PinvT2(mean, pinv, t2_train, ucl)


@dataclass(frozen=True)
class GridRecord:
    replicate: int
    rank: int
    t2_true: float
    label: bool
    metric: float
    flagged: bool


@dataclass(frozen=True)
class ReplicateSummary:
    replicate: int
    lam: float | None
    ucl: float
    train_t2_min: float
    train_t2_max: float
    train_t2_mean: float
    grid_fpr: float | None
    fresh_fpr: float


@dataclass(frozen=True)
class RankTPR:
    rank: int
    positives: int
    tpr: float | None
    ci: tuple[float, float] | None


@dataclass(frozen=True)
class StudyResult:
    scenario: SimulationScenario
    tpr_by_rank: tuple[RankTPR, ...]
    fpr: float | None
    fpr_ci: tuple[float, float] | None
    fresh_fpr: float
    fresh_fpr_ci: tuple[float, float]
    records: tuple[GridRecord, ...]
    replicate_summaries: tuple[ReplicateSummary, ...]

    def to_json(self) -> dict:
        return {
            "v": 1,
            "scenario": self.scenario.to_json(),
            "tpr_by_rank": [{"rank": t.rank, "positives": t.positives, "tpr": t.tpr,
                             "ci": None if t.ci is None else list(t.ci)}
                            for t in self.tpr_by_rank],
            "fpr": self.fpr,
            "fpr_ci": None if self.fpr_ci is None else list(self.fpr_ci),
            "fresh_fpr": self.fresh_fpr,
            "fresh_fpr_ci": list(self.fresh_fpr_ci),
            "replicates": [{"replicate": s.replicate, "lambda": s.lam, "ucl": s.ucl,
                            "train_t2_min": s.train_t2_min, "train_t2_max": s.train_t2_max,
                            "train_t2_mean": s.train_t2_mean, "grid_fpr": s.grid_fpr,
                            "fresh_fpr": s.fresh_fpr}
                           for s in self.replicate_summaries],
        }


def run_study(scenario: SimulationScenario) -> StudyResult:
    """Run every replicate and aggregate rates.

    Replicate seeds derive from the scenario seed by counter, so the result
    is reproducible and independent of evaluation order.
    """
    sc = scenario
    flags_by_rank: list[list[bool]] = [[] for _ in range(sc.n_grid)]
    records: list[GridRecord] = []
    summaries: list[ReplicateSummary] = []
    grid_fprs: list[float] = []
    fresh_fprs: list[float] = []

    for rep in range(sc.replicates):
        rng = np.random.default_rng([sc.seed, rep])
        x, true_sigma = simulate_factor_matrix(sc.n, sc.p, sc.r, rng, noise=sc.noise)
        grid = extrapolation_grid(x, true_sigma, sc.n_grid, sc.alpha)

        fresh = rng.multivariate_normal(np.zeros(sc.p), true_sigma, size=sc.n,
                                        method="cholesky")
        fresh_neg = _true_t2(fresh, true_sigma) <= grid.chi2_threshold

        if sc.p_cat > 0:
            disc = discretize(x, sc.p_cat, rng)
            train_values = encode(disc.dataset, disc.space)
            grid_values = encode(disc.apply(grid.points), disc.space).values
            fresh_values = encode(disc.apply(fresh), disc.space).values
        else:
            train_values, grid_values, fresh_values = x, grid.points, fresh

        if sc.variant == "regularized":
            model = fit_regt2_model(train_values)
            lam: float | None = model.cov.lam
            ucl = model.ucl
            t2_train = model.t2_train
            grid_metric = t2_many(model, grid_values)
            fresh_metric = t2_many(model, fresh_values)
        else:
            pinv_model = _fit_pinv(train_values)
            lam, ucl, t2_train = None, pinv_model.ucl, pinv_model.t2_train
            grid_metric = pinv_model.t2(grid_values)
            fresh_metric = pinv_model.t2(fresh_values)

        grid_flags = grid_metric > ucl
        fresh_flags = fresh_metric > ucl

        for g in range(sc.n_grid):
            records.append(GridRecord(rep, g + 1, float(grid.t2_true[g]),
                                      bool(grid.labels[g]), float(grid_metric[g]),
                                      bool(grid_flags[g])))
            if grid.labels[g]:
                flags_by_rank[g].append(bool(grid_flags[g]))

        neg = ~grid.labels
        grid_fpr = float(grid_flags[neg].mean()) if neg.any() else None
        if grid_fpr is not None:
            grid_fprs.append(grid_fpr)
        fresh_fpr = float(fresh_flags[fresh_neg].mean()) if fresh_neg.any() else 0.0
        fresh_fprs.append(fresh_fpr)
        summaries.append(ReplicateSummary(rep, lam, float(ucl), float(t2_train.min()),
                                          float(t2_train.max()), float(t2_train.mean()),
                                          grid_fpr, fresh_fpr))

    tpr_by_rank = tuple(_rank_stat(g + 1, flags_by_rank[g]) for g in range(sc.n_grid))
    fpr, fpr_ci = _rate_with_ci(grid_fprs)
    fresh_fpr_m, fresh_ci = _rate_with_ci(fresh_fprs)
    assert fresh_fpr_m is not None and fresh_ci is not None
    return StudyResult(sc, tpr_by_rank, fpr, fpr_ci, fresh_fpr_m, fresh_ci,
                       tuple(records), tuple(summaries))


def _rank_stat(rank: int, flags: list[bool]) -> RankTPR:
    if not flags:
        return RankTPR(rank, 0, None, None)
    tpr, ci = _rate_with_ci([float(f) for f in flags])
    return RankTPR(rank, len(flags), tpr, ci)


def _rate_with_ci(rates: list[float]) -> tuple[float | None, tuple[float, float] | None]:
    """Normal-approximation 95% interval for a mean rate across replicates."""
    if not rates:
        return None, None
    arr = np.asarray(rates, dtype=float)
    m = float(arr.mean())
    if len(arr) == 1:
        return m, (m, m)
    half = 1.959963984540054 * float(arr.std(ddof=1)) / math.sqrt(len(arr))
    return m, (m - half, m + half)


def write_records_csv(result: StudyResult, path) -> None:
    """One row per replicate x grid rank, the documented study output."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate", "rank", "t2_true", "label", "metric", "flagged"])
        for r in result.records:
            w.writerow([r.replicate, r.rank, f"{r.t2_true:.10g}", int(r.label),
                        f"{r.metric:.10g}", int(r.flagged)])

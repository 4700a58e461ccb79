"""Pairwise-deletion moments and a diagonal-target shrinkage covariance.

Means and covariance entries are estimated from every row where the needed
cells are present (pairwise deletion), with the pair count as divisor.  The
covariance is then shrunk toward the diagonal matrix of sample variances,

    sigma = (1 - lambda) * U + lambda * D,

with the analytic mean-squared-error-minimizing weight of Schafer-Strimmer
type: lambda = sum of estimated variances of the off-diagonal entries over
the sum of their squares, clamped to [0, 1].  The diagonal target leaves
variances untouched and makes the estimate positive definite for any p > n
as soon as lambda > 0 and all variances are positive.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .factors import EncodedMatrix


class CovarianceError(ValueError):
    """Degenerate inputs: empty columns, zero variances, failed factorization."""


@dataclass(frozen=True)
class ShrunkCovariance:
    mean: np.ndarray         # (p,) pairwise-deletion column means
    sample_cov: np.ndarray   # (p, p) pairwise-deletion covariance U
    target: np.ndarray       # (p,) sample variances, the diagonal of D
    lam: float
    sigma: np.ndarray        # (p, p) shrunk covariance
    pair_counts: np.ndarray  # (p, p) number of jointly observed rows
    chol: np.ndarray         # lower Cholesky factor used for quadratic forms

    @property
    def p(self) -> int:
        return len(self.mean)

    def mahalanobis_sq(self, x: np.ndarray) -> np.ndarray:
        """Quadratic form (x - mean)' sigma^-1 (x - mean), row-wise.

        Missing coordinates (NaN) are imputed at the training mean, i.e.
        they contribute zero deviation.
        """
        d = np.atleast_2d(np.asarray(x, dtype=float)) - self.mean
        d = np.where(np.isnan(d), 0.0, d)
        z = solve_triangular(self.chol, d.T, lower=True)
        out = np.einsum("ij,ij->j", z, z)
        return out if np.ndim(x) > 1 else out[0]

    def inv_apply(self, d: np.ndarray) -> np.ndarray:
        """sigma^-1 d via the stored factorization."""
        z = solve_triangular(self.chol, d, lower=True)
        return solve_triangular(self.chol.T, z, lower=False)


def _as_arrays(m) -> tuple[np.ndarray, np.ndarray, tuple[str, ...] | None]:
    if isinstance(m, EncodedMatrix):
        return m.values, ~m.missing, m.column_names()
    values = np.asarray(m, dtype=float)
    return values, ~np.isnan(values), None


def pairwise_moments(m, ddof: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pairwise-deletion mean vector, covariance matrix, and pair counts.

    Each covariance entry averages the cross products over the rows where
    both cells are present, divided by (pair count - ddof); ddof=0 is the
    default throughout.  Off-diagonal entries with fewer than 2 jointly
    observed rows are set to 0; pair_counts carries the evidence.
    """
    values, present, names = _as_arrays(m)
    n, p = values.shape
    counts_col = present.sum(axis=0)
    if (counts_col == 0).any():
        bad = int(np.argmax(counts_col == 0))
        label = names[bad] if names else str(bad)
        raise CovarianceError(f"column {label} has no observed values")

    filled = np.where(present, values, 0.0)
    mean = filled.sum(axis=0) / counts_col
    z = np.where(present, values - mean, 0.0)
    pf = present.astype(float)
    counts = pf.T @ pf
    denom = counts - ddof
    with np.errstate(divide="ignore", invalid="ignore"):
        cov = np.where(denom > 0, (z.T @ z) / np.where(denom > 0, denom, 1.0), 0.0)
    degenerate = (counts < 2) & ~np.eye(p, dtype=bool)
    cov[degenerate] = 0.0
    return mean, cov, counts.astype(int)


def shrinkage_lambda(m, moments: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None) -> float:
    """Analytic shrinkage weight for the diagonal target.

    lambda = clamp( sum_{k!=l} Var(u_kl) / sum_{k!=l} u_kl^2, 0, 1 ) where
    Var(u_kl) is the empirical variance of the mean of the per-row cross
    products w_i = (x_ik - mean_k)(x_il - mean_l) over the n_kl jointly
    observed rows: Var(u_kl) = sum_i (w_i - u_kl)^2 / (n_kl (n_kl - 1)).
    The ratio is identical under the unbiased n-1 rescaling of both moments,
    so this matches the published estimator for the diagonal target.
    """
    values, present, _ = _as_arrays(m)
    n, p = values.shape
    if n < 3:
        raise CovarianceError(f"need at least 3 rows to estimate lambda, got {n}")
    if p == 1:
        return 0.0
    if moments is None:
        moments = pairwise_moments(m)
    mean, _, counts = moments

    z = np.where(present, values - mean, 0.0)
    pf = present.astype(float)
    nkl = pf.T @ pf
    sum_w = z.T @ z
    sum_w2 = (z ** 2).T @ (z ** 2)
    valid = (nkl >= 2) & ~np.eye(p, dtype=bool)

    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(valid, sum_w / np.where(nkl > 0, nkl, 1.0), 0.0)
        ss = sum_w2 - nkl * u ** 2
        var_u = np.where(valid, ss / np.where(valid, nkl * (nkl - 1), 1.0), 0.0)

    num = float(var_u[valid].sum())
    den = float((u[valid] ** 2).sum())
    if den == 0.0:
        return 1.0
    return float(np.clip(num / den, 0.0, 1.0))


def shrunk_covariance(m, lam: float | None = None, ddof: int = 0) -> ShrunkCovariance:
    """Assemble the shrunk covariance with its Cholesky factorization.

    `lam` overrides the analytic weight (tests force the endpoints).  If the
    factorization fails at lam > 0, one jitter of 1e-10 * max variance is
    added and the factorization retried before giving up.
    """
    values, present, names = _as_arrays(m)
    moments = pairwise_moments(m, ddof=ddof)
    mean, cov, counts = moments
    target = np.diag(cov).copy()
    if (target <= 0).any():
        bad = int(np.argmax(target <= 0))
        label = names[bad] if names else str(bad)
        raise CovarianceError(f"column {label} has zero variance; drop it or widen the data")

    if lam is None:
        lam = shrinkage_lambda(m, moments=moments)
    if not 0.0 <= lam <= 1.0:
        raise CovarianceError(f"lambda must be in [0, 1], got {lam}")

    sigma = (1.0 - lam) * cov
    np.fill_diagonal(sigma, target)

    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        if lam > 0:
            jitter = 1e-10 * float(target.max())
            try:
                chol = np.linalg.cholesky(sigma + jitter * np.eye(len(sigma)))
            except np.linalg.LinAlgError:
                raise CovarianceError("shrunk covariance is not positive definite even after jitter")
        else:
            raise CovarianceError(
                "sample covariance is singular at lambda=0; use lambda > 0 (shrinkage)")
    return ShrunkCovariance(mean, cov, target, float(lam), sigma, counts, chol)

"""Exact k-FWER comparator procedures built on least-squares p-values.

Three baselines: the generalized Holm step-down, a generic step-down whose
critical values come from Monte Carlo draws of the joint null law of the
t-statistics, and a step-up procedure driven by a supplied vector of
critical constants.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import (
    DegenerateFit,
    DimensionError,
    InsufficientDraws,
    MissingConstants,
    RankDeficient,
)

MIN_NULL_DRAWS = 100


@dataclass(frozen=True)
class PValueVector:
    """Two-sided OLS p-values with the t-statistics behind them."""

    p_values: np.ndarray
    t_stats: np.ndarray
    sigma_hat_sq: float
    dof: int

    @property
    def p(self):
        return self.p_values.shape[0]


@dataclass(frozen=True)
class CriticalValues:
    """Non-decreasing critical constants for a step procedure."""

    values: np.ndarray
    procedure_tag: str  # holm_kfwer | stepdown_generic | stepup

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(np.diff(v) < 0):
            raise MissingConstants("critical values must be non-decreasing")
        if np.any((v <= 0) | (v >= 1)):
            raise MissingConstants("critical values must lie in (0, 1)")
        object.__setattr__(self, "values", v)


def ols_pvalues(design, y):
    """Two-sided p-values from the OLS t-statistics of a full regression.

    t_j = beta_j / (sigma_hat * sqrt((X'X)^{-1}_jj)) against a Student-t
    reference with n - p degrees of freedom.
    """
    x = design.values
    y = np.asarray(y, dtype=float)
    n, p = x.shape
    if y.shape != (n,):
        raise DimensionError(f"response must have length {n}")
    if n <= p:
        raise DimensionError(f"need n > p for OLS p-values, got n={n}, p={p}")
    gram = x.T @ x
    try:
        gram_inv = np.linalg.inv(gram)
    except np.linalg.LinAlgError as exc:
        raise RankDeficient("X'X is singular") from exc
    beta = gram_inv @ (x.T @ y)
    rss = float(np.sum((y - x @ beta) ** 2))
    if rss <= 1e-12 * max(1.0, float(y @ y)):
        raise DegenerateFit("residual sum of squares is numerically zero")
    dof = n - p
    sigma_hat_sq = rss / dof
    se = np.sqrt(sigma_hat_sq * np.diag(gram_inv))
    t = beta / se
    pv = 2.0 * sps.t.sf(np.abs(t), dof)
    return PValueVector(p_values=pv, t_stats=t, sigma_hat_sq=sigma_hat_sq, dof=dof)


def holm_critical_values(p, k, alpha):
    """Generalized Holm constants: k*alpha/p for i <= k, k*alpha/(p+k-i) after."""
    i = np.arange(1, p + 1)
    return np.where(i <= k, k * alpha / p, k * alpha / (p + k - i))


def holm_kfwer(pv, k, alpha):
    """Step-down on sorted p-values with the generalized Holm constants."""
    if k < 1:
        raise ValueError("k must be positive")
    p = pv.p
    order = np.argsort(pv.p_values, kind="stable")
    sorted_p = pv.p_values[order]
    crit = holm_critical_values(p, k, alpha)
    failures = np.flatnonzero(sorted_p > crit)
    stop = int(failures[0]) if failures.size else p
    return frozenset(int(j) for j in order[:stop])


def make_t_null_sampler(design, seed):
    """Sampler of joint-null p-value vectors for a fixed design.

    Under the global null the OLS t-statistics are multivariate-t: correlated
    normals (correlation from (X'X)^{-1}) over a shared chi-square scale.
    Only the known design enters, so the draws are exact up to Monte Carlo
    error.
    """
    x = design.values
    n, p = x.shape
    if n <= p:
        raise DimensionError("need n > p")
    dof = n - p
    gram_inv = np.linalg.inv(x.T @ x)
    d = np.sqrt(np.diag(gram_inv))
    corr = gram_inv / np.outer(d, d)
    chol = np.linalg.cholesky(corr + 1e-12 * np.eye(p))
    rng = np.random.default_rng(seed)

    def sampler(size):
        z = rng.standard_normal((size, p)) @ chol.T
        scale = np.sqrt(rng.chisquare(dof, size) / dof)
        t = z / scale[:, None]
        return 2.0 * sps.t.sf(np.abs(t), dof)

    return sampler


def stepdown_generic(pv, k, alpha, null_sampler, n_draws=2000):
    """Generic step-down with Monte Carlo critical values.

    At stage i the critical value is the alpha-quantile (the ceil((B+1)alpha)
    order statistic over B draws) of the k-th smallest null p-value over the
    hypotheses still in play: the unrejected ones plus the k - 1 most recent
    rejections.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if n_draws < MIN_NULL_DRAWS:
        raise InsufficientDraws(f"need at least {MIN_NULL_DRAWS} draws, got {n_draws}")
    p = pv.p
    null_p = np.asarray(null_sampler(n_draws), dtype=float)
    if null_p.shape != (n_draws, p):
        raise DimensionError("null sampler returned the wrong shape")
    order = np.argsort(pv.p_values, kind="stable")
    sorted_p = pv.p_values[order]
    m = min(int(np.ceil((n_draws + 1) * alpha)), n_draws)
    rejected = 0
    for i in range(1, p + 1):
        lo = max(0, i - k)
        members = order[lo:]
        kth_smallest = np.partition(null_p[:, members], k - 1, axis=1)[:, k - 1]
        crit = np.sort(kth_smallest)[m - 1]
        if sorted_p[i - 1] <= crit:
            rejected = i
        else:
            break
    return frozenset(int(j) for j in order[:rejected])


def flat_critical_values(p, k, alpha):
    """Bonferroni-flat step-up constants k*alpha/p: valid but conservative."""
    return CriticalValues(values=np.full(p, k * alpha / p), procedure_tag="stepup")


def stepup_kfwer(pv, k, alpha, constants=None):
    """Step-up: reject the i* smallest p-values, i* the largest i with
    p_(i) <= c_i.

    When no constants are supplied, falls back to the flat k*alpha/p vector
    (with a warning): validity is retained, power is not.
    """
    if k < 1:
        raise ValueError("k must be positive")
    p = pv.p
    if constants is None:
        warnings.warn(
            "no step-up critical values configured; using the conservative "
            "flat k*alpha/p fallback (validity retained, power suffers)",
            stacklevel=2,
        )
        constants = flat_critical_values(p, k, alpha)
    if constants.values.shape != (p,):
        raise MissingConstants(
            f"expected {p} critical values, got {constants.values.shape[0]}"
        )
    order = np.argsort(pv.p_values, kind="stable")
    sorted_p = pv.p_values[order]
    hits = np.flatnonzero(sorted_p <= constants.values)
    i_star = int(hits[-1]) + 1 if hits.size else 0
    return frozenset(int(j) for j in order[:i_star])


def load_critical_values(path):
    """Read one critical value per line from a plain-text file."""
    values = np.loadtxt(path, dtype=float, ndmin=1)
    return CriticalValues(values=values, procedure_tag="stepup")

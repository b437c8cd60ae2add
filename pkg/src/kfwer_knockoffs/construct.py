"""Knockoff design construction.

Given a column-normalized design X, builds a companion matrix Xt with the
same Gram matrix and cross-products X'Xt = X'X - Diag(s).  The knockoff
columns act as negative controls: for a null variable, the original and its
knockoff are exchangeable, so neither is more likely to look significant.

We use the equicorrelated recipe

    Xt = X (I - Sigma^{-1} Diag(s)) + U C,

where Sigma = X'X, U is an n x p orthonormal basis of the complement of the
column space of X, and C'C = 2 Diag(s) - Diag(s) Sigma^{-1} Diag(s).
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateFit,
    DimensionError,
    InfeasibleS,
    NotPositiveDefinite,
    RankDeficient,
    ZeroColumn,
)

NORM_TOL = 1e-10
RANK_TOL_FACTOR = 1e-10
EIG_CLIP_TOL = 1e-10


@dataclass(frozen=True)
class DesignMatrix:
    """Column-normalized n x p design with full column rank."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DimensionError("design must be a 2-d matrix")
        n, p = v.shape
        if n < p:
            raise DimensionError(f"need n >= p, got n={n}, p={p}")
        norms = np.linalg.norm(v, axis=0)
        if np.any(np.abs(norms - 1.0) > NORM_TOL):
            j = int(np.argmax(np.abs(norms - 1.0)))
            raise ValueError(
                f"column {j} has norm {norms[j]:.12g}, expected 1 within {NORM_TOL:g}"
            )
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    def gram(self):
        return self.values.T @ self.values


@dataclass(frozen=True)
class KnockoffAugment:
    """A design paired with its knockoff copy and the decorrelation vector s."""

    original: DesignMatrix
    knockoff: np.ndarray
    s: np.ndarray

    @property
    def augmented(self):
        """n x 2p concatenation [X, Xt]."""
        return np.hstack([self.original.values, self.knockoff])

    @property
    def p(self):
        return self.original.p


def normalize_columns(raw, rank_tol_factor=RANK_TOL_FACTOR):
    """Scale each column of `raw` to unit l2-norm and validate rank.

    Raises ZeroColumn for an all-zero column, DimensionError when n < p, and
    RankDeficient when the smallest singular value of the normalized matrix
    falls at or below rank_tol_factor times the largest.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2:
        raise DimensionError("design must be a 2-d matrix")
    n, p = raw.shape
    if n < p:
        raise DimensionError(f"need n >= p, got n={n}, p={p}")
    norms = np.linalg.norm(raw, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroColumn(int(zero[0]))
    v = raw / norms
    sv = np.linalg.svd(v, compute_uv=False)
    if sv[-1] <= rank_tol_factor * sv[0]:
        raise RankDeficient(
            f"smallest singular value {sv[-1]:.3e} <= {rank_tol_factor:g} * {sv[0]:.3e}"
        )
    return DesignMatrix(v)


def equicorrelated_s(gram):
    """s_j = min(2 * lambda_min(gram), 1) for all j.

    This uniform choice maximizes the common decorrelation between each
    variable and its knockoff while keeping the augmented Gram matrix PSD.
    """
    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise DimensionError("gram must be square")
    if not np.allclose(gram, gram.T, atol=1e-10):
        raise NotPositiveDefinite("gram matrix is not symmetric")
    if np.any(np.abs(np.diag(gram) - 1.0) > 1e-8):
        raise NotPositiveDefinite("gram matrix does not have unit diagonal")
    lam_min = float(np.linalg.eigvalsh(gram)[0])
    if lam_min <= 0.0:
        raise NotPositiveDefinite(f"smallest eigenvalue {lam_min:.3e} <= 0")
    p = gram.shape[0]
    return np.full(p, min(2.0 * lam_min, 1.0))


def construct_knockoffs(design, s):
    """Build the knockoff copy of `design` for a given decorrelation vector s.

    Requires n >= 2p so an orthonormal complement of the column space large
    enough for the correction term exists.  For p <= n < 2p, see
    `augment_rows`.
    """
    s = np.asarray(s, dtype=float)
    X = design.values
    n, p = X.shape
    if s.shape != (p,):
        raise DimensionError(f"s must have length {p}")
    if np.any(s < 0):
        raise InfeasibleS("s has negative entries")
    if n < 2 * p:
        raise DimensionError(
            f"need n >= 2p for the native construction, got n={n}, p={p}; "
            "use augment_rows to opt into row augmentation"
        )
    sigma = X.T @ X
    sigma_inv = np.linalg.inv(sigma)
    # A = 2 Diag(s) - Diag(s) Sigma^{-1} Diag(s), the Gram of the correction
    a = 2.0 * np.diag(s) - (s[:, None] * sigma_inv) * s[None, :]
    a = 0.5 * (a + a.T)
    eigval, eigvec = np.linalg.eigh(a)
    if eigval[0] < -EIG_CLIP_TOL:
        raise InfeasibleS(
            f"2 Diag(s) - Diag(s) Sigma^-1 Diag(s) has eigenvalue {eigval[0]:.3e}"
        )
    c = np.sqrt(np.clip(eigval, 0.0, None))[:, None] * eigvec.T
    # Deterministic Householder QR completion gives the orthonormal complement.
    q_full, _ = np.linalg.qr(X, mode="complete")
    u = q_full[:, p:2 * p]
    knockoff = X - X @ (sigma_inv * s[None, :]) + u @ c
    return KnockoffAugment(original=design, knockoff=knockoff, s=s)


def verify_identities(aug, tol=1e-8):
    """Max-abs deviations of the two Gram identities, plus a pass flag.

    Returns (dev_gram, dev_cross, ok): deviation of Xt'Xt from X'X, deviation
    of X'Xt from X'X - Diag(s), and whether both are within tol.
    """
    X = aug.original.values
    Xt = aug.knockoff
    sigma = X.T @ X
    dev_gram = float(np.max(np.abs(Xt.T @ Xt - sigma)))
    dev_cross = float(np.max(np.abs(X.T @ Xt - (sigma - np.diag(aug.s)))))
    return dev_gram, dev_cross, (dev_gram <= tol and dev_cross <= tol)


def augment_rows(design, y, rng):
    """Opt-in row augmentation for p <= n < 2p.

    Appends 2p - n zero rows to the design and response rows drawn as
    Gaussian noise with variance estimated from the OLS residuals, so the
    native n >= 2p construction applies to the padded problem.
    """
    X = design.values
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise DimensionError(f"response must have length {n}")
    extra = 2 * p - n
    if extra <= 0:
        return design, y
    if n == p:
        raise DegenerateFit("cannot estimate noise variance with n == p")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    rss = float(np.sum((y - X @ beta) ** 2))
    sigma_sq = rss / (n - p)
    x_pad = np.vstack([X, np.zeros((extra, p))])
    y_pad = np.concatenate([y, rng.normal(0.0, np.sqrt(sigma_sq), size=extra)])
    return DesignMatrix(x_pad), y_pad

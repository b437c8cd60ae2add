"""Lasso path solver and per-variable entry times.

The solver minimizes (1/2)||y - A b||^2 + lambda ||b||_1 by cyclic
coordinate descent on the Gram matrix ("covariance updates"), which keeps
the per-lambda cost independent of n once A'A and A'y are formed.  The path
runs down a geometric lambda grid with warm starts; the entry time of a
coordinate is the largest grid lambda at which its coefficient is nonzero.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DimensionError, NoConvergence


@dataclass(frozen=True)
class PathSpec:
    """Grid and convergence knobs for the regularization path."""

    grid_size: int = 200
    grid_ratio: float = 1e-3
    cd_tol: float = 1e-7
    max_iters: int = 10000

    def __post_init__(self):
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        if not 0.0 < self.grid_ratio < 1.0:
            raise ValueError("grid_ratio must be in (0, 1)")
        if self.cd_tol <= 0.0:
            raise ValueError("cd_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass(frozen=True)
class EntryTimes:
    """Largest active grid lambda per coordinate of the augmented design."""

    z: np.ndarray
    lambda_max: float


@njit(cache=True)
def _cd_gram(gram, cov, lam, b, tol, max_iters):
    """Cyclic coordinate descent on the Gram system; returns sweeps or -1.

    Mutates b in place.  Convergence is declared when the max KKT violation
    drops to tol: |r_j| <= lam on inactive coordinates and r_j = sign(b_j)*lam
    on active ones, where r_j = cov_j - (gram b)_j.

    Pure cyclic sweeps crawl when the Gram matrix is near-singular (the
    equicorrelated knockoff construction makes it exactly singular), so every
    tenth unconverged sweep solves the stationarity system on the current
    active set and line-searches toward that solution.  When the sign pattern
    makes the stationarity system infeasible the least-squares jump can point
    uphill, so the step is taken only if it is a descent direction, with an
    exact minimization of the fixed-sign quadratic capped at the first sign
    crossing, and reverted outright if the objective fails to decrease.
    """
    m = gram.shape[0]
    q = gram @ b
    for sweep in range(max_iters):
        for j in range(m):
            gjj = gram[j, j]
            r = cov[j] - q[j] + gjj * b[j]
            if r > lam:
                bj = (r - lam) / gjj
            elif r < -lam:
                bj = (r + lam) / gjj
            else:
                bj = 0.0
            d = bj - b[j]
            if d != 0.0:
                b[j] = bj
                q += d * gram[j]
        max_viol = 0.0
        for j in range(m):
            rj = cov[j] - q[j]
            if b[j] > 0.0:
                viol = abs(rj - lam)
            elif b[j] < 0.0:
                viol = abs(rj + lam)
            else:
                viol = abs(rj) - lam
                if viol < 0.0:
                    viol = 0.0
            if viol > max_viol:
                max_viol = viol
        if max_viol <= tol:
            return sweep + 1
        if (sweep + 1) % 10 == 0:
            idx = np.flatnonzero(b)
            na = idx.size
            if na > 0:
                gaa = np.empty((na, na))
                rhs = np.empty(na)
                for s in range(na):
                    js = idx[s]
                    for t in range(na):
                        gaa[s, t] = gram[js, idx[t]]
                    rhs[s] = cov[js] - (lam if b[js] > 0.0 else -lam)
                sol = np.linalg.lstsq(gaa, rhs)[0]
                d = np.empty(na)
                g0 = 0.0
                for s in range(na):
                    js = idx[s]
                    d[s] = sol[s] - b[js]
                    sub = lam if b[js] > 0.0 else -lam
                    g0 += d[s] * (q[js] - cov[js] + sub)
                if g0 < 0.0:
                    # cap the step at the first sign crossing
                    tmax = 1.0
                    for s in range(na):
                        bs = b[idx[s]]
                        if bs * sol[s] < 0.0:
                            cross = bs / (bs - sol[s])
                            if cross < tmax:
                                tmax = cross
                    c0 = d @ (gaa @ d)
                    t_step = tmax
                    if c0 > 0.0 and -g0 / c0 < tmax:
                        t_step = -g0 / c0
                    if t_step > 0.0:
                        f_old = 0.5 * (b @ q) - cov @ b + lam * np.abs(b).sum()
                        b_old = b.copy()
                        for s in range(na):
                            js = idx[s]
                            new = b[js] + t_step * d[s]
                            # land exactly on zero at a sign crossing
                            if (t_step >= tmax and b[js] * sol[s] < 0.0
                                    and abs(new) < 1e-12 * abs(d[s])):
                                new = 0.0
                            b[js] = new
                        q = gram @ b
                        f_new = 0.5 * (b @ q) - cov @ b + lam * np.abs(b).sum()
                        if f_new > f_old:
                            b[:] = b_old
                            q = gram @ b
    return -1


def _null_space(gram):
    """Eigenvectors of gram with (numerically) zero eigenvalue.

    The equicorrelated knockoff construction makes the augmented Gram
    exactly singular; the objective is flat along these directions except
    for the l1 term, which is what makes plain coordinate descent crawl.
    """
    evals, evecs = np.linalg.eigh(gram)
    scale = float(np.max(np.abs(evals))) or 1.0
    return evecs[:, evals < 1e-10 * scale]


def _null_move(gram, cov, lam, b, e):
    """Exact 1-D minimization of the objective along direction e.

    When gram @ e ~ 0 the quadratic part is flat and the l1 term is a
    weighted sum of |t - t_j| kinks, so the minimizer is a weighted median.
    Mutates b in place when the move lowers the objective; returns True if
    it did.
    """
    mask = e != 0.0
    if not mask.any():
        return False
    g = float(e @ (gram @ b) - e @ cov)
    kinks = -b[mask] / e[mask]
    weights = lam * np.abs(e[mask])
    order = np.argsort(kinks)
    kinks = kinks[order]
    weights = weights[order]
    total = weights.sum()
    # subgradient just right of each kink; piecewise constant, increasing
    s_right = g + (2.0 * np.cumsum(weights) - total)
    hit = np.flatnonzero(s_right >= 0.0)
    if hit.size == 0 or g - total >= 0.0:
        return False  # no interior minimizer along this direction
    i = int(hit[0])
    t_star = kinks[i]
    if t_star == 0.0:
        return False
    obj_old = 0.5 * b @ (gram @ b) - cov @ b + lam * np.abs(b).sum()
    b_new = b + t_star * e
    b_new[np.flatnonzero(mask)[order[i]]] = 0.0  # land exactly on the kink
    obj_new = 0.5 * b_new @ (gram @ b_new) - cov @ b_new + lam * np.abs(b_new).sum()
    if obj_new >= obj_old:
        return False
    b[:] = b_new
    return True


def _solve_gram(gram, cov, lam, b, tol, max_iters, null_vecs):
    """Drive _cd_gram in chunks, breaking flat-direction stalls in between."""
    remaining = max_iters
    while True:
        chunk = min(remaining, 500)
        status = _cd_gram(gram, cov, lam, b, tol, chunk)
        if status >= 0:
            return max_iters - remaining + status
        remaining -= chunk
        if remaining <= 0:
            return -1
        for idx in range(null_vecs.shape[1]):
            _null_move(gram, cov, lam, b, null_vecs[:, idx])


def kkt_violation(gram, cov, b, lam):
    """Max KKT residual of b for the penalized least-squares problem."""
    r = cov - gram @ b
    viol = np.where(
        b == 0.0,
        np.maximum(np.abs(r) - lam, 0.0),
        np.abs(r - np.sign(b) * lam),
    )
    return float(viol.max()) if viol.size else 0.0


def lasso_solve(a, y, lam, warm_start=None, cd_tol=1e-7, max_iters=10000):
    """Solve min_b (1/2)||y - A b||^2 + lam ||b||_1 to KKT tolerance cd_tol."""
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if a.ndim != 2 or y.shape != (a.shape[0],):
        raise DimensionError("design and response dimensions are inconsistent")
    m = a.shape[1]
    gram = a.T @ a
    cov = a.T @ y
    b = np.zeros(m) if warm_start is None else np.array(warm_start, dtype=float)
    if b.shape != (m,):
        raise DimensionError(f"warm_start must have length {m}")
    status = _solve_gram(gram, cov, lam, b, cd_tol, max_iters, _null_space(gram))
    if status < 0:
        raise NoConvergence(max_iters, lam)
    assert kkt_violation(gram, cov, b, lam) <= cd_tol * (1.0 + 1e-9)
    return b


def entry_times_matrix(a, y, spec=PathSpec()):
    """Entry times for every column of a generic design matrix `a`.

    The grid runs geometrically from lambda_max = max_j |a_j'y| down to
    grid_ratio * lambda_max.  The KKT tolerance is applied relative to
    lambda_max so results are exactly scale-equivariant in y.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    if a.ndim != 2 or y.shape != (a.shape[0],):
        raise DimensionError("design and response dimensions are inconsistent")
    m = a.shape[1]
    cov = a.T @ y
    lambda_max = float(np.max(np.abs(cov))) if m else 0.0
    z = np.zeros(m)
    if lambda_max == 0.0:
        return EntryTimes(z=z, lambda_max=0.0)
    # lambda_max * r^(i/(N-1)) so the grid scales exactly with lambda_max
    grid = lambda_max * np.geomspace(1.0, spec.grid_ratio, spec.grid_size)
    gram = a.T @ a
    tol = spec.cd_tol * lambda_max
    null_vecs = _null_space(gram)
    b = np.zeros(m)
    for lam in grid:
        status = _solve_gram(gram, cov, lam, b, tol, spec.max_iters, null_vecs)
        if status < 0:
            raise NoConvergence(spec.max_iters, lam)
        newly_active = (b != 0.0) & (z == 0.0)
        z[newly_active] = lam
    return EntryTimes(z=z, lambda_max=lambda_max)


def entry_times(aug, y, spec=PathSpec()):
    """Entry times on the augmented design [X, Xt] of a KnockoffAugment."""
    return entry_times_matrix(aug.augmented, y, spec)

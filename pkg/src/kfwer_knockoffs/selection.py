"""k-FWER selection from knockoff statistics.

Each variable gets W_j = max of its two entry times and a sign chi_j telling
whether the original or the knockoff entered the path first.  Under the null
the signs are fair coins, so scanning variables by decreasing W and stopping
at the v-th minus sign bounds the false rejection count by a negative
binomial NB(v, 1/2).  Calibration picks v (possibly randomized between two
adjacent values) so that P(at least k false rejections) is at most alpha.
"""

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from scipy import stats as sps

EXACT_NB_LIMIT = 64  # use rational arithmetic when v + k is at most this


@dataclass(frozen=True)
class KnockoffStats:
    """Per-variable (W, chi) with the induced descending-W ordering."""

    w: np.ndarray
    chi: np.ndarray
    order: np.ndarray  # permutation sorting w descending, ties by index

    @property
    def p(self):
        return self.w.shape[0]


@dataclass(frozen=True)
class Calibration:
    """Resolved (v, omega) for a k-FWER target alpha."""

    k: int
    alpha: float
    v: int
    omega: float
    randomized: bool
    v_used: int


@dataclass(frozen=True)
class SelectionResult:
    """Rejections plus the threshold and calibration metadata."""

    rejected: frozenset
    threshold: float
    cutoff_index: int  # j*: number of scan positions covered
    v_used: int
    topped_up: int = 0


def compute_stats(entry):
    """Fold the 2p entry times into per-variable (W, chi, order)."""
    z = np.asarray(entry.z, dtype=float)
    if z.ndim != 1 or z.shape[0] % 2 != 0:
        raise ValueError("entry times must be a flat vector of even length")
    p = z.shape[0] // 2
    z_orig, z_ko = z[:p], z[p:]
    w = np.maximum(z_orig, z_ko)
    chi = np.sign(z_orig - z_ko).astype(int)
    order = np.lexsort((np.arange(p), -w))
    return KnockoffStats(w=w, chi=chi, order=order)


def nb_tail(v, k):
    """P(NB(v, 1/2) >= k): chance of at least k successes before the v-th failure.

    Exact rational arithmetic for v + k <= 64; the regularized incomplete
    beta (scipy's nbinom survival function) beyond that.
    """
    if v < 0 or k < 1:
        raise ValueError("need v >= 0 and k >= 1")
    if v == 0:
        return 0.0
    if v + k <= EXACT_NB_LIMIT:
        head = sum(
            Fraction(math.comb(i + v - 1, i), 2 ** (i + v)) for i in range(k)
        )
        return float(1 - head)
    return float(sps.nbinom.sf(k - 1, v, 0.5))


def choose_v(k, alpha):
    """Largest v with nb_tail(v, k) <= alpha; v = 0 if none qualifies."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    v = 0
    while nb_tail(v + 1, k) <= alpha:
        v += 1
    return Calibration(k=k, alpha=alpha, v=v, omega=1.0, randomized=False, v_used=v)


def _randomized_from_u(k, alpha, u):
    """Randomized calibration resolved with a pre-drawn uniform variate u."""
    base = choose_v(k, alpha).v
    lo, hi = nb_tail(base, k), nb_tail(base + 1, k)
    if hi == lo:
        omega = 1.0
    else:
        omega = (hi - alpha) / (hi - lo)
    v_used = base if u < omega else base + 1
    return Calibration(
        k=k, alpha=alpha, v=base, omega=omega, randomized=True, v_used=v_used
    )


def choose_v_randomized(k, alpha, rng):
    """Mix adjacent v values so P(V >= k) = alpha exactly under the null.

    Consumes exactly one uniform variate from rng, so a run is replayable
    from its seed.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    return _randomized_from_u(k, alpha, float(rng.uniform()))


def select(stats, v):
    """Ordered scan: reject plus signs up to the position of the v-th minus.

    Zero signs are skipped entirely: never rejected, never counted as a
    minus.  v = 0 rejects nothing.
    """
    if v < 0:
        raise ValueError("v must be nonnegative")
    p = stats.p
    if v == 0:
        return SelectionResult(
            rejected=frozenset(), threshold=math.inf, cutoff_index=0, v_used=0
        )
    chi_ord = stats.chi[stats.order]
    neg_positions = np.flatnonzero(chi_ord == -1)
    if neg_positions.size >= v:
        j_star = int(neg_positions[v - 1]) + 1
        threshold = float(stats.w[stats.order[j_star - 1]])
    else:
        j_star = p
        threshold = -math.inf
    prefix = stats.order[:j_star]
    rejected = frozenset(int(j) for j in prefix[stats.chi[prefix] == 1])
    return SelectionResult(
        rejected=rejected, threshold=threshold, cutoff_index=j_star, v_used=int(v)
    )


def select_by_threshold(stats, v):
    """Threshold form of the scan: reject {j : W_j >= T_v, chi_j = +1}.

    Equivalent to `select` whenever the W values are distinct; kept as an
    independent cross-check implementation.
    """
    if v < 0:
        raise ValueError("v must be nonnegative")
    if v == 0:
        return frozenset()
    neg_w = np.sort(stats.w[stats.chi == -1])[::-1]
    if neg_w.size >= v:
        threshold = float(neg_w[v - 1])
    else:
        threshold = -math.inf
    mask = (stats.w >= threshold) & (stats.chi == 1)
    return frozenset(int(j) for j in np.flatnonzero(mask))


def top_up(result, stats, k):
    """Guarantee at least k - 1 rejections without affecting the k-FWER.

    Appends the largest-W positive-sign variables not already rejected until
    k - 1 rejections are made or positives run out.
    """
    if k < 1:
        raise ValueError("k must be positive")
    need = (k - 1) - len(result.rejected)
    if need <= 0:
        return result
    added = []
    for j in stats.order:
        j = int(j)
        if stats.chi[j] == 1 and j not in result.rejected:
            added.append(j)
            if len(added) == need:
                break
    if not added:
        return result
    return replace(
        result,
        rejected=result.rejected | frozenset(added),
        topped_up=len(added),
    )


def chernoff_bound(v, a):
    """Tail bound P(V >= (1+a) v) <= theta(a)^v with

    theta(a) = (a+2)^(a+2) / (2^(a+2) (a+1)^(a+1)), evaluated in log-space.
    """
    if v < 1:
        raise ValueError("v must be >= 1")
    if a <= 0:
        raise ValueError("a must be positive")
    log_theta = (
        (a + 2) * math.log(a + 2)
        - (a + 2) * math.log(2)
        - (a + 1) * math.log(a + 1)
    )
    return math.exp(v * log_theta)

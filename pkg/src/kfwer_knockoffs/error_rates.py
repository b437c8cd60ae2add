"""PFER and FDX targets layered on the k-FWER machinery.

The same ordered scan that bounds P(V >= k) also bounds E(V) by v, giving
per-family error rate control for free.  For the false discovery exceedance
we provide the augmentation of a k-FWER run and the Romano--Wolf adaptive-k
heuristic.
"""

import math
from dataclasses import replace

from .selection import SelectionResult, _randomized_from_u, select, top_up


def pfer_budget_to_v(budget):
    """v = floor(budget); running the scan with this v keeps E(V) <= budget."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    return int(math.floor(budget))


def _extend_rejections(result, stats, extra):
    """Add up to `extra` largest-W positive-sign variables not yet rejected."""
    added = []
    for j in stats.order:
        j = int(j)
        if stats.chi[j] == 1 and j not in result.rejected:
            added.append(j)
            if len(added) == extra:
                break
    if not added:
        return result
    return replace(result, rejected=result.rejected | frozenset(added))


def fdx_augment(base, k, gamma, stats):
    """Augment a k-FWER-controlling run to control P(FDP > gamma).

    With R base rejections: if R = 0 or (k-1)/R > gamma, reject nothing.
    Otherwise add the largest r with (k-1+r)/(R+r) <= gamma further
    rejections, taken from the largest-W positive-sign variables (fewer if
    positives run out).
    """
    if k < 1:
        raise ValueError("k must be positive")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must be in (0, 1)")
    r_base = len(base.rejected)
    if r_base == 0 or (k - 1) / r_base > gamma:
        return replace(base, rejected=frozenset(), topped_up=0)
    extra = int(math.floor((gamma * r_base - (k - 1)) / (1.0 - gamma)))
    # settle float noise at integer boundaries against the defining inequality
    while extra > 0 and (k - 1 + extra) / (r_base + extra) > gamma:
        extra -= 1
    while (k + extra) / (r_base + extra + 1) <= gamma:
        extra += 1
    if extra <= 0:
        return base
    return _extend_rejections(base, stats, extra)


def romano_wolf_fdx(stats, gamma, alpha, rng):
    """Adaptive-k heuristic for FDX control.

    Runs the randomized k-FWER procedure (with top-up) at level alpha for
    k = 1, 2, ... and stops at the smallest k whose rejection count R_k
    satisfies R_k < k/gamma - 1, returning that run's rejections.  A single
    uniform draw is shared across all k so the nested runs see coherent
    randomization.  The search is capped at k = p (it provably stops by
    k > gamma * (p + 1)).
    """
    if not 0.0 < gamma < 1.0 or not 0.0 < alpha < 1.0:
        raise ValueError("gamma and alpha must be in (0, 1)")
    u = float(rng.uniform())
    p = stats.p
    result = SelectionResult(
        rejected=frozenset(), threshold=math.inf, cutoff_index=0, v_used=0
    )
    for k in range(1, p + 1):
        cal = _randomized_from_u(k, alpha, u)
        result = top_up(select(stats, cal.v_used), stats, k)
        if len(result.rejected) < k / gamma - 1:
            return result
    return result

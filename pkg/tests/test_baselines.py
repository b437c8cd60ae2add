import math

import numpy as np
import pytest
from scipy import stats as sps

from kfwer_knockoffs import normalize_columns
from kfwer_knockoffs.baselines import (
    CriticalValues,
    PValueVector,
    flat_critical_values,
    holm_critical_values,
    holm_kfwer,
    load_critical_values,
    make_t_null_sampler,
    ols_pvalues,
    stepdown_generic,
    stepup_kfwer,
)
from kfwer_knockoffs.errors import (
    DegenerateFit,
    DimensionError,
    InsufficientDraws,
    MissingConstants,
)


def pv_from(p_values):
    p_values = np.asarray(p_values, dtype=float)
    return PValueVector(
        p_values=p_values, t_stats=np.zeros_like(p_values), sigma_hat_sq=1.0, dof=10
    )


class TestOlsPvalues:
    def test_hand_fixture_matches_normal_equations(self):
        x = np.array(
            [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0], [0.0, 0.5]]
        )
        d = normalize_columns(x)
        rng = np.random.default_rng(0)
        y = d.values @ np.array([2.0, -1.0]) + rng.standard_normal(5)
        pv = ols_pvalues(d, y)
        # independent computation straight from the normal equations
        g = d.values.T @ d.values
        beta = np.linalg.solve(g, d.values.T @ y)
        rss = np.sum((y - d.values @ beta) ** 2)
        sigma2 = rss / 3
        t_ref = beta / np.sqrt(sigma2 * np.diag(np.linalg.inv(g)))
        assert np.allclose(pv.t_stats, t_ref, atol=1e-10)
        assert pv.dof == 3

    def test_null_pvalues_uniform(self):
        rng = np.random.default_rng(1)
        d = normalize_columns(rng.standard_normal((30, 4)))
        pvals = []
        for _ in range(2000):
            y = rng.standard_normal(30)
            pvals.extend(ols_pvalues(d, y).p_values)
        ks = sps.kstest(pvals, "uniform")
        assert ks.pvalue > 0.01

    def test_degenerate_fit_raises(self):
        d = normalize_columns(np.eye(5)[:, :2])
        y = d.values @ np.array([1.0, 2.0])
        with pytest.raises(DegenerateFit):
            ols_pvalues(d, y)

    def test_n_equal_p_raises(self):
        d = normalize_columns(np.eye(3))
        with pytest.raises(DimensionError):
            ols_pvalues(d, np.ones(3))

    def test_rotation_invariance(self):
        rng = np.random.default_rng(2)
        d = normalize_columns(rng.standard_normal((20, 3)))
        y = rng.standard_normal(20)
        x = d.values
        # rotation acting on the orthogonal complement of col(X) fixes the fit
        q, _ = np.linalg.qr(x, mode="complete")
        basis = q[:, 3:]
        rot = np.linalg.qr(rng.standard_normal((17, 17)))[0]
        y_rot = x @ np.linalg.lstsq(x, y, rcond=None)[0] + basis @ rot @ (basis.T @ y)
        a = ols_pvalues(d, y)
        b = ols_pvalues(d, y_rot)
        assert np.allclose(a.t_stats, b.t_stats, atol=1e-8)


class TestHolm:
    def test_k1_is_classical_holm(self):
        crit = holm_critical_values(5, 1, 0.05)
        assert np.allclose(crit, 0.05 / (5 - np.arange(1, 6) + 1))

    def test_all_ones_rejects_nothing(self):
        assert holm_kfwer(pv_from([1.0] * 6), 2, 0.1) == frozenset()

    def test_hand_scan(self):
        pv = pv_from([0.01, 0.04, 0.06, 0.9])
        crit = holm_critical_values(4, 2, 0.1)
        assert np.allclose(crit, [0.05, 0.05, 0.2 / 3, 0.1])
        assert holm_kfwer(pv, 2, 0.1) == {0, 1, 2}

    def test_monotone_in_alpha(self):
        rng = np.random.default_rng(3)
        pv = pv_from(rng.uniform(0, 1, 20) ** 2)
        prev = frozenset()
        for alpha in (0.01, 0.05, 0.1, 0.3):
            cur = holm_kfwer(pv, 2, alpha)
            assert prev <= cur
            prev = cur

    def test_null_level_monte_carlo(self):
        rng = np.random.default_rng(4)
        d = normalize_columns(rng.standard_normal((60, 15)))
        k, alpha, reps = 2, 0.1, 1000
        exceed = 0
        for _ in range(reps):
            y = rng.standard_normal(60)
            if len(holm_kfwer(ols_pvalues(d, y), k, alpha)) >= k:
                exceed += 1
        se = math.sqrt(alpha * (1 - alpha) / reps)
        assert exceed / reps <= alpha + 3 * se


class TestStepdownGeneric:
    def test_stage_one_matches_beta_order_statistic(self):
        # independent uniforms: the k-th smallest of p is Beta(k, p-k+1)
        p, k, alpha, draws = 12, 3, 0.1, 40000
        rng = np.random.default_rng(5)

        def sampler(size):
            return rng.uniform(size=(size, p))

        target = float(sps.beta.ppf(alpha, k, p - k + 1))
        # push one p-value across the stage-one critical value to observe it
        for trial in np.linspace(0.2 * target, 2 * target, 30):
            got = stepdown_generic(
                pv_from([trial] + [1.0] * (p - 1)), k, alpha, sampler, n_draws=draws
            )
            if not got:
                # first failure: trial exceeded the estimated critical value
                assert trial > target * 0.85
                return
        pytest.fail("stage-one critical value above twice the Beta quantile")

    def test_k_equals_p_boundary(self):
        p = 4
        rng = np.random.default_rng(6)

        def sampler(size):
            return rng.uniform(size=(size, p))

        rejected = stepdown_generic(
            pv_from([1e-6] * p), p, 0.2, sampler, n_draws=2000
        )
        assert rejected == frozenset(range(p))

    def test_insufficient_draws(self):
        with pytest.raises(InsufficientDraws):
            stepdown_generic(pv_from([0.5]), 1, 0.1, lambda size: np.ones((size, 1)),
                             n_draws=10)

    def test_null_level_monte_carlo(self):
        rng = np.random.default_rng(7)
        d = normalize_columns(rng.standard_normal((50, 10)))
        k, alpha, reps = 2, 0.1, 400
        exceed = 0
        for i in range(reps):
            y = rng.standard_normal(50)
            sampler = make_t_null_sampler(d, int(rng.integers(1 << 31)))
            rej = stepdown_generic(ols_pvalues(d, y), k, alpha, sampler, n_draws=500)
            if len(rej) >= k:
                exceed += 1
        se = math.sqrt(alpha * (1 - alpha) / reps)
        assert exceed / reps <= alpha + 3 * se


class TestStepup:
    def test_flat_constants_reject_exactly_k(self):
        p, k, alpha = 10, 3, 0.1
        c = k * alpha / p
        pvals = np.concatenate([np.full(k, c - 1e-9), np.ones(p - k)])
        got = stepup_kfwer(pv_from(pvals), k, alpha, flat_critical_values(p, k, alpha))
        assert len(got) == k

    def test_all_ones_rejects_nothing(self):
        got = stepup_kfwer(pv_from([1.0] * 5), 2, 0.1, flat_critical_values(5, 2, 0.1))
        assert got == frozenset()

    def test_stepup_superset_of_stepdown_same_constants(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            p = 15
            pvals = rng.uniform(0, 0.3, p)
            const = np.sort(rng.uniform(0.01, 0.5, p))
            cv = CriticalValues(values=const, procedure_tag="stepup")
            up = stepup_kfwer(pv_from(pvals), 1, 0.1, cv)
            # step-down scan with identical constants
            order = np.argsort(pvals)
            sp = pvals[order]
            down = 0
            for i in range(p):
                if sp[i] <= const[i]:
                    down = i + 1
                else:
                    break
            assert frozenset(int(j) for j in order[:down]) <= up

    def test_fallback_warns(self):
        with pytest.warns(UserWarning):
            stepup_kfwer(pv_from([0.001, 0.5]), 1, 0.1)

    def test_wrong_length_constants(self):
        with pytest.raises(MissingConstants):
            stepup_kfwer(pv_from([0.5] * 4), 1, 0.1, flat_critical_values(3, 1, 0.1))

    def test_non_monotone_constants_rejected(self):
        with pytest.raises(MissingConstants):
            CriticalValues(values=np.array([0.2, 0.1]), procedure_tag="stepup")

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "crit.txt"
        path.write_text("0.01\n0.02\n0.03\n")
        cv = load_critical_values(path)
        assert np.allclose(cv.values, [0.01, 0.02, 0.03])

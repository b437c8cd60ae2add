import numpy as np
import pytest

from kfwer_knockoffs.errors import ConfigError
from kfwer_knockoffs.simulate import (
    SimConfig,
    desk_preset,
    gen_design,
    gen_signal,
    paper_preset,
    run_point,
    run_replicate,
    run_sweep,
    write_aggregate_csv,
    write_tidy_csv,
)


class TestGenDesign:
    def test_unit_columns_full_rank(self):
        rng = np.random.default_rng(0)
        d = gen_design(50, 10, 0.3, rng)
        assert np.allclose(np.linalg.norm(d.values, axis=0), 1.0)

    def test_rho_zero_correlations_small(self):
        rng = np.random.default_rng(1)
        hits = 0
        for _ in range(20):
            d = gen_design(400, 20, 0.0, rng)
            corr = d.values.T @ d.values
            off = corr[~np.eye(20, dtype=bool)]
            if np.max(np.abs(off)) <= 4 / np.sqrt(400):
                hits += 1
        assert hits >= 15

    def test_rho_half_mean_correlation(self):
        rng = np.random.default_rng(2)
        d = gen_design(1000, 20, 0.5, rng)
        corr = d.values.T @ d.values
        off = corr[~np.eye(20, dtype=bool)]
        assert abs(off.mean() - 0.5) < 0.05

    def test_single_column(self):
        rng = np.random.default_rng(3)
        d = gen_design(30, 1, 0.7, rng)
        assert d.p == 1
        assert np.linalg.norm(d.values) == pytest.approx(1.0)

    def test_bad_rho(self):
        with pytest.raises(ConfigError):
            gen_design(10, 2, 1.0, np.random.default_rng(0))


class TestGenSignal:
    def test_global_null(self):
        beta = gen_signal(10, 0, 5.0, np.random.default_rng(0))
        assert np.all(beta == 0.0)

    def test_dense(self):
        beta = gen_signal(10, 10, 5.0, np.random.default_rng(0))
        assert np.all(beta == 5.0)

    def test_paper_snr(self):
        beta = gen_signal(450, 10, 10.0, np.random.default_rng(0))
        assert np.sum(beta != 0) == 10
        assert np.sum(beta**2) == pytest.approx(1000.0)
        assert np.sum(beta**2) / 25.0 == pytest.approx(40.0)


class TestRunReplicate:
    def cfg(self, **kw):
        base = dict(
            n=60, p=12, nnz=3, magnitude=8.0, sigma_sq=4.0, k=2, alpha=0.2,
            replicates=1, seed=0, procedures=("knockoffs", "holm"),
        )
        base.update(kw)
        return SimConfig(**base)

    def test_scoring_identity(self):
        recs = run_replicate(self.cfg(), np.random.default_rng(0))
        for rec in recs:
            assert rec.v + rec.true_count == rec.r

    def test_global_null_scores_everything_false(self):
        recs = run_replicate(self.cfg(nnz=0), np.random.default_rng(1))
        for rec in recs:
            assert rec.true_count == 0 and rec.v == rec.r

    def test_zero_magnitude_equivalent_to_null(self):
        recs = run_replicate(self.cfg(nnz=3, magnitude=0.0), np.random.default_rng(2))
        for rec in recs:
            assert rec.true_count == 0

    def test_deterministic(self):
        a = run_replicate(self.cfg(), np.random.default_rng(7))
        b = run_replicate(self.cfg(), np.random.default_rng(7))
        assert a == b


class TestSweep:
    def cfg(self, **kw):
        base = dict(
            n=60, p=12, nnz=3, magnitude=8.0, sigma_sq=4.0, k=2, alpha=0.2,
            replicates=4, seed=11, procedures=("knockoffs", "holm"),
        )
        base.update(kw)
        return SimConfig(**base)

    def test_reports_per_grid_point(self):
        reports = run_sweep(self.cfg(), "rho", [0.0, 0.4], n_jobs=1)
        assert len(reports) == 2
        assert reports[0].config.rho == 0.0
        assert reports[1].config.rho == 0.4

    def test_single_point_matches_run_point(self):
        a = run_sweep(self.cfg(), "magnitude", [8.0], n_jobs=1)[0]
        b = run_point(self.cfg(), grid_param="magnitude", grid_value=8.0, n_jobs=1)
        assert a.records == b.records

    def test_determinism_bytes(self, tmp_path):
        paths = []
        for tag in ("a", "b"):
            reports = run_sweep(self.cfg(), "rho", [0.0, 0.3], n_jobs=1)
            tidy = tmp_path / f"tidy_{tag}.csv"
            agg = tmp_path / f"agg_{tag}.csv"
            write_tidy_csv(reports, tidy)
            write_aggregate_csv(reports, agg)
            paths.append((tidy.read_bytes(), agg.read_bytes()))
        assert paths[0] == paths[1]

    def test_bad_sweep_param(self):
        with pytest.raises(ConfigError):
            run_sweep(self.cfg(), "sigma_sq", [1.0])

    def test_aggregates_consistent(self):
        report = run_point(self.cfg(), n_jobs=1)
        agg = report.aggregates()
        for proc in ("knockoffs", "holm"):
            a = agg[proc]
            assert 0.0 <= a["power"] <= 1.0
            assert 0.0 <= a["kfwer_hat"] <= 1.0
            assert a["replicates"] == 4

    def test_fixed_design_mode(self):
        cfg = self.cfg(fixed_design=True, nnz=0)
        report = run_point(cfg, n_jobs=1)
        assert len(report.records) == 8


def test_presets():
    desk = desk_preset()
    assert (desk.n, desk.p, desk.nnz) == (300, 90, 6)
    paper = paper_preset()
    assert (paper.n, paper.p, paper.nnz) == (1000, 450, 10)
    assert paper.scale_preset == "paper"


def test_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(n=10, p=20)
    with pytest.raises(ConfigError):
        SimConfig(procedures=("knockoffs", "mystery"))
    with pytest.raises(ConfigError):
        SimConfig(sigma_sq=0.0)

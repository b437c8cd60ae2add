"""Monte Carlo harness for power / error-rate comparisons.

Generates equicorrelated Gaussian designs and sparse signals, runs the
configured procedures on each replicate, and aggregates power and empirical
k-FWER over sweeps of correlation, sparsity, or signal magnitude.  Every
replicate owns a generator derived from (seed, grid index, replicate index),
so any single record is reproducible in isolation.
"""

import os
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np
from joblib import Parallel, delayed

from .baselines import holm_kfwer, make_t_null_sampler, ols_pvalues, stepdown_generic, stepup_kfwer
from .construct import construct_knockoffs, equicorrelated_s, normalize_columns
from .errors import ConfigError, RankDeficient
from .lasso import PathSpec, entry_times
from .selection import choose_v_randomized, compute_stats, select, top_up

KNOWN_PROCEDURES = ("knockoffs", "holm", "stepdown", "stepup")
SWEEPABLE = ("rho", "nnz", "magnitude")


@dataclass(frozen=True)
class SimConfig:
    n: int = 300
    p: int = 90
    sigma_sq: float = 25.0
    rho: float = 0.0
    nnz: int = 6
    magnitude: float = 10.0
    k: int = 5
    alpha: float = 0.05
    replicates: int = 100
    seed: int = 0
    procedures: tuple = ("knockoffs", "holm")
    scale_preset: str = "desk"
    fixed_design: bool = False
    stepdown_draws: int = 2000
    path: PathSpec = field(default_factory=PathSpec)

    def __post_init__(self):
        if not (0 <= self.nnz <= self.p <= self.n):
            raise ConfigError("need nnz <= p <= n")
        if self.sigma_sq <= 0:
            raise ConfigError("sigma_sq must be positive")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError("rho must be in [0, 1)")
        unknown = set(self.procedures) - set(KNOWN_PROCEDURES)
        if unknown:
            raise ConfigError(f"unknown procedures: {sorted(unknown)}")


@dataclass(frozen=True)
class ReplicateRecord:
    procedure: str
    r: int          # total rejections
    v: int          # false rejections
    true_count: int


@dataclass(frozen=True)
class SimReport:
    grid_param: str
    grid_value: float
    config: SimConfig
    records: tuple  # one tuple of ReplicateRecord per replicate, flattened

    def aggregates(self):
        """Per-procedure power / empirical k-FWER with standard errors."""
        out = {}
        for proc in self.config.procedures:
            recs = [r for r in self.records if r.procedure == proc]
            reps = len(recs)
            nnz = self.config.nnz
            if nnz > 0:
                powers = np.array([r.true_count / nnz for r in recs])
            else:
                powers = np.zeros(reps)
            exceed = np.array([r.v >= self.config.k for r in recs], dtype=float)
            kfwer_hat = float(exceed.mean())
            out[proc] = {
                "power": float(powers.mean()),
                "power_se": float(powers.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0,
                "kfwer_hat": kfwer_hat,
                "kfwer_se": float(np.sqrt(kfwer_hat * (1 - kfwer_hat) / reps)),
                "mean_r": float(np.mean([r.r for r in recs])),
                "mean_v": float(np.mean([r.v for r in recs])),
                "replicates": reps,
            }
        return out


def desk_preset(**overrides):
    """Desk-scale default: n=300, p=90, nnz=6, magnitude 10, sigma^2=25."""
    return SimConfig(**overrides)


def paper_preset(**overrides):
    """Full-scale configuration: n=1000, p=450, nnz=10, 2000 replicates."""
    base = dict(
        n=1000, p=450, nnz=10, magnitude=10.0, sigma_sq=25.0,
        k=5, alpha=0.05, replicates=2000, scale_preset="paper",
    )
    base.update(overrides)
    return SimConfig(**base)


def gen_design(n, p, rho, rng):
    """Normalized design with i.i.d. equicorrelated Gaussian rows.

    Row covariance (1 - rho) I + rho 11'; columns unit-normalized after the
    draw.  Retries once on a rank-deficient draw.
    """
    if not 0.0 <= rho < 1.0:
        raise ConfigError("rho must be in [0, 1)")
    for attempt in range(2):
        z = rng.standard_normal((n, p))
        if rho > 0.0:
            shared = rng.standard_normal(n)
            raw = np.sqrt(1.0 - rho) * z + np.sqrt(rho) * shared[:, None]
        else:
            raw = z
        try:
            return normalize_columns(raw)
        except RankDeficient:
            if attempt == 1:
                raise
    raise AssertionError("unreachable")


def gen_signal(p, nnz, magnitude, rng):
    """Coefficient vector with a uniformly random support of size nnz.

    All nonzero entries equal +magnitude; mixed signs stay expressible by
    flipping the magnitude in config.
    """
    if not 0 <= nnz <= p:
        raise ConfigError("need 0 <= nnz <= p")
    beta = np.zeros(p)
    support = rng.choice(p, size=nnz, replace=False)
    beta[support] = magnitude
    return beta


def _run_knockoffs(design, y, cfg, rng):
    s = equicorrelated_s(design.gram())
    aug = construct_knockoffs(design, s)
    stats = compute_stats(entry_times(aug, y, cfg.path))
    cal = choose_v_randomized(cfg.k, cfg.alpha, rng)
    return top_up(select(stats, cal.v_used), stats, cfg.k).rejected


def _run_replicate_core(cfg, design, rng):
    beta = gen_signal(cfg.p, cfg.nnz, cfg.magnitude, rng)
    y = design.values @ beta + rng.normal(0.0, np.sqrt(cfg.sigma_sq), cfg.n)
    support = set(np.flatnonzero(beta != 0.0).tolist())
    pv = None
    records = []
    for proc in cfg.procedures:
        if proc == "knockoffs":
            rejected = _run_knockoffs(design, y, cfg, rng)
        else:
            if pv is None:
                pv = ols_pvalues(design, y)
            if proc == "holm":
                rejected = holm_kfwer(pv, cfg.k, cfg.alpha)
            elif proc == "stepdown":
                sampler = make_t_null_sampler(design, int(rng.integers(2**63)))
                rejected = stepdown_generic(
                    pv, cfg.k, cfg.alpha, sampler, n_draws=cfg.stepdown_draws
                )
            elif proc == "stepup":
                rejected = stepup_kfwer(pv, cfg.k, cfg.alpha,
                                        constants=cfg_stepup_constants(cfg))
        true_count = len(rejected & support)
        records.append(
            ReplicateRecord(
                procedure=proc,
                r=len(rejected),
                v=len(rejected) - true_count,
                true_count=true_count,
            )
        )
    return records


def cfg_stepup_constants(cfg):
    """Step-up constants hook; None selects the flat fallback."""
    from .baselines import flat_critical_values

    return flat_critical_values(cfg.p, cfg.k, cfg.alpha)


def run_replicate(cfg, rng, design=None):
    """Run every configured procedure on one synthetic dataset."""
    if design is None:
        design = gen_design(cfg.n, cfg.p, cfg.rho, rng)
    return _run_replicate_core(cfg, design, rng)


def _replicate_task(cfg, grid_index, rep):
    if cfg.fixed_design:
        design = gen_design(
            cfg.n, cfg.p, cfg.rho, np.random.default_rng([cfg.seed, grid_index, 0, 0])
        )
    else:
        design = gen_design(
            cfg.n, cfg.p, cfg.rho, np.random.default_rng([cfg.seed, grid_index, rep, 0])
        )
    rng = np.random.default_rng([cfg.seed, grid_index, rep, 1])
    return _run_replicate_core(cfg, design, rng)


def run_point(cfg, grid_param="none", grid_value=float("nan"), grid_index=0, n_jobs=None):
    """All replicates at a single configuration point."""
    if n_jobs is None:
        n_jobs = min(os.cpu_count() or 1, cfg.replicates)
    tasks = (
        delayed(_replicate_task)(cfg, grid_index, rep)
        for rep in range(cfg.replicates)
    )
    per_rep = Parallel(n_jobs=n_jobs)(tasks)
    records = tuple(rec for recs in per_rep for rec in recs)
    return SimReport(
        grid_param=grid_param, grid_value=grid_value, config=cfg, records=records
    )


def run_sweep(base, sweep_param, grid, n_jobs=None):
    """One SimReport per grid value of rho, nnz, or magnitude."""
    if sweep_param not in SWEEPABLE:
        raise ConfigError(f"sweep parameter must be one of {SWEEPABLE}")
    reports = []
    for gi, value in enumerate(grid):
        cfg = dc_replace(
            base, **{sweep_param: int(value) if sweep_param == "nnz" else float(value)}
        )
        reports.append(
            run_point(cfg, grid_param=sweep_param, grid_value=float(value),
                      grid_index=gi, n_jobs=n_jobs)
        )
    return reports


def _fmt(x):
    return f"{x:.17g}"


def write_tidy_csv(reports, path):
    """One row per (grid value, replicate, procedure)."""
    with open(path, "w") as fh:
        fh.write("grid_param,grid_value,replicate,procedure,R,V,true_count,power_contrib\n")
        for report in reports:
            nnz = report.config.nnz
            n_procs = len(report.config.procedures)
            for idx, rec in enumerate(report.records):
                rep = idx // n_procs
                contrib = rec.true_count / nnz if nnz else 0.0
                fh.write(
                    f"{report.grid_param},{_fmt(report.grid_value)},{rep},"
                    f"{rec.procedure},{rec.r},{rec.v},{rec.true_count},{_fmt(contrib)}\n"
                )


def write_aggregate_csv(reports, path):
    """Per-(grid value, procedure) means and standard errors."""
    with open(path, "w") as fh:
        fh.write(
            "grid_param,grid_value,procedure,power,power_se,kfwer_hat,kfwer_se,"
            "mean_R,mean_V,replicates\n"
        )
        for report in reports:
            for proc, agg in report.aggregates().items():
                fh.write(
                    f"{report.grid_param},{_fmt(report.grid_value)},{proc},"
                    f"{_fmt(agg['power'])},{_fmt(agg['power_se'])},"
                    f"{_fmt(agg['kfwer_hat'])},{_fmt(agg['kfwer_se'])},"
                    f"{_fmt(agg['mean_r'])},{_fmt(agg['mean_v'])},{agg['replicates']}\n"
                )

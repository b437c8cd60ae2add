"""Command-line surface: construct, select, simulate, analyze.

Every run writes a manifest (arguments, seed, library versions) next to its
outputs so it can be replayed exactly.  Exit codes: 0 success, 2 input
error, 3 numerical failure, 4 configuration error.
"""

import argparse
import json
import math
import os
import sys

import numpy as np
import scipy

from . import __version__
from .construct import augment_rows, construct_knockoffs, equicorrelated_s, normalize_columns
from .dataio import Dataset, clean_dataset, read_dataset, read_design
from .error_rates import fdx_augment, pfer_budget_to_v, romano_wolf_fdx
from .errors import (
    ConfigError,
    DegenerateFit,
    DimensionError,
    EmptyDataset,
    InfeasibleS,
    InsufficientDraws,
    KfkoError,
    MissingConstants,
    MissingGenotype,
    NoConvergence,
    NotPositiveDefinite,
    RankDeficient,
    RankDeficientAfterCleaning,
    UnknownLabel,
    ZeroColumn,
)
from .lasso import PathSpec, entry_times
from .selection import choose_v, choose_v_randomized, compute_stats, select, top_up
from .simulate import (
    desk_preset,
    paper_preset,
    run_sweep,
    write_aggregate_csv,
    write_tidy_csv,
)

INPUT_ERRORS = (
    ZeroColumn, DimensionError, EmptyDataset, UnknownLabel, MissingGenotype,
    MissingConstants, InsufficientDraws,
)
NUMERICAL_ERRORS = (
    RankDeficient, RankDeficientAfterCleaning, NotPositiveDefinite,
    InfeasibleS, NoConvergence, DegenerateFit,
)


def _fmt(x):
    return f"{x:.17g}"


def _write_manifest(path, command, params, seed):
    params = {key: val for key, val in params.items() if key != "func"}
    manifest = {
        "command": command,
        "params": params,
        "seed": seed,
        "versions": {
            "kfwer_knockoffs": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _path_spec(args):
    kwargs = {}
    if args.grid_size is not None:
        kwargs["grid_size"] = args.grid_size
    if args.grid_ratio is not None:
        kwargs["grid_ratio"] = args.grid_ratio
    return PathSpec(**kwargs)


def _add_path_opts(parser):
    parser.add_argument("--grid-size", type=int, default=None)
    parser.add_argument("--grid-ratio", type=float, default=None)


def _load_cleaned(args):
    ds = read_dataset(args.input, args.response)
    if args.min_mutations > 0:
        ds = clean_dataset(ds, args.min_mutations)
    else:
        keep = ~np.isnan(ds.response)
        ds = Dataset(
            design=ds.design[keep], response=ds.response[keep], labels=ds.labels
        )
        if np.isnan(ds.design).any():
            raise MissingGenotype("design contains missing cells; impute upstream")
    return ds


def _stats_pipeline(args, rng):
    ds = _load_cleaned(args)
    design = normalize_columns(ds.design)
    y = ds.response
    if design.n < 2 * design.p:
        if not args.allow_row_augment:
            raise DimensionError(
                f"n={design.n} < 2p={2 * design.p}; pass --allow-row-augment to opt in"
            )
        design, y = augment_rows(design, y, rng)
    s = equicorrelated_s(design.gram())
    aug = construct_knockoffs(design, s)
    stats = compute_stats(entry_times(aug, y, _path_spec(args)))
    return ds.labels, stats


def _write_selection(out_prefix, labels, stats, result, extra):
    report_path = out_prefix
    base, ext = os.path.splitext(out_prefix)
    result_path = base + "_result.json"
    manifest_path = base + "_manifest.json"
    with open(report_path, "w") as fh:
        fh.write("label,W,chi,rejected\n")
        for j, label in enumerate(labels):
            fh.write(
                f"{label},{_fmt(stats.w[j])},{int(stats.chi[j])},"
                f"{int(j in result.rejected)}\n"
            )
    payload = {
        "rejected_labels": sorted(labels[j] for j in result.rejected),
        "rejected_indices": sorted(result.rejected),
        "threshold": None if math.isinf(result.threshold) else result.threshold,
        "threshold_repr": _fmt(result.threshold),
        "cutoff_index": result.cutoff_index,
        "v_used": result.v_used,
        "topped_up": result.topped_up,
    }
    payload.update(extra)
    with open(result_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return result_path, manifest_path


def cmd_construct(args):
    values, labels = read_design(args.input)
    design = normalize_columns(values)
    if design.n < 2 * design.p:
        if not args.allow_row_augment:
            raise DimensionError(
                f"n={design.n} < 2p={2 * design.p}; pass --allow-row-augment to opt in"
            )
        pad = np.zeros((2 * design.p - design.n, design.p))
        design = normalize_columns(np.vstack([design.values, pad]))
    s = equicorrelated_s(design.gram())
    aug = construct_knockoffs(design, s)
    with open(args.output, "w") as fh:
        fh.write(",".join(f"ko_{l}" for l in labels) + "\n")
        for row in aug.knockoff:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    base, _ = os.path.splitext(args.output)
    _write_manifest(base + "_manifest.json", "construct", vars(args), None)
    return 0


def cmd_select(args):
    rng = np.random.default_rng(args.seed)
    labels, stats = _stats_pipeline(args, rng)
    if args.no_randomize:
        cal = choose_v(args.k, args.alpha)
        draw = None
    else:
        draw = float(rng.uniform())
        from .selection import _randomized_from_u

        cal = _randomized_from_u(args.k, args.alpha, draw)
    result = select(stats, cal.v_used)
    if not args.no_topup:
        result = top_up(result, stats, args.k)
    extra = {
        "k": args.k,
        "alpha": args.alpha,
        "v": cal.v,
        "omega": cal.omega,
        "randomized": cal.randomized,
        "randomization_draw": draw,
        "branch": "v" if cal.v_used == cal.v else "v_plus_one",
    }
    _, manifest_path = _write_selection(args.out, labels, stats, result, extra)
    _write_manifest(manifest_path, "select", vars(args), args.seed)
    return 0


def cmd_simulate(args):
    preset = desk_preset if args.preset == "desk" else paper_preset
    overrides = {"replicates": args.replicates, "seed": args.seed}
    if args.procedures:
        overrides["procedures"] = tuple(args.procedures.split(","))
    cfg = preset(**overrides)
    grid = [float(v) for v in args.grid.split(",")]
    reports = run_sweep(cfg, args.sweep, grid, n_jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    write_tidy_csv(reports, os.path.join(args.out, "tidy.csv"))
    write_aggregate_csv(reports, os.path.join(args.out, "aggregate.csv"))
    _write_manifest(
        os.path.join(args.out, "manifest.json"), "simulate", vars(args), args.seed
    )
    return 0


def cmd_analyze(args):
    targets = [
        args.pfer is not None,
        args.fdx_gamma is not None,
        args.rw_gamma is not None,
    ]
    if sum(targets) != 1:
        raise ConfigError(
            "set exactly one error-rate target: --pfer, --fdx-gamma, or --rw-gamma"
        )
    if args.fdx_gamma is not None and args.k is None:
        raise ConfigError("--fdx-gamma requires --k")
    rng = np.random.default_rng(args.seed)
    labels, stats = _stats_pipeline(args, rng)
    extra = {"alpha": args.alpha}
    if args.pfer is not None:
        v = pfer_budget_to_v(args.pfer)
        result = select(stats, v)
        extra.update({"target": "pfer", "budget": args.pfer, "v": v})
    elif args.fdx_gamma is not None:
        cal = choose_v_randomized(args.k, args.alpha, rng)
        base = top_up(select(stats, cal.v_used), stats, args.k)
        result = fdx_augment(base, args.k, args.fdx_gamma, stats)
        extra.update(
            {
                "target": "fdx_augment",
                "gamma": args.fdx_gamma,
                "k": args.k,
                "base_rejections": len(base.rejected),
            }
        )
    else:
        result = romano_wolf_fdx(stats, args.rw_gamma, args.alpha, rng)
        extra.update({"target": "romano_wolf", "gamma": args.rw_gamma})
    _, manifest_path = _write_selection(args.out, labels, stats, result, extra)
    _write_manifest(manifest_path, "analyze", vars(args), args.seed)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kfko",
        description="Knockoff-based k-FWER control for Gaussian linear regression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_con = sub.add_parser("construct", help="build a knockoff copy of a design CSV")
    p_con.add_argument("--input", required=True)
    p_con.add_argument("--output", required=True)
    p_con.add_argument("--allow-row-augment", action="store_true")
    p_con.set_defaults(func=cmd_construct)

    p_sel = sub.add_parser("select", help="run the k-FWER knockoffs procedure")
    p_sel.add_argument("--input", required=True)
    p_sel.add_argument("--response", required=True)
    p_sel.add_argument("--k", type=int, required=True)
    p_sel.add_argument("--alpha", type=float, required=True)
    p_sel.add_argument("--seed", type=int, required=True)
    p_sel.add_argument("--out", required=True)
    p_sel.add_argument("--no-randomize", action="store_true")
    p_sel.add_argument("--no-topup", action="store_true")
    p_sel.add_argument("--min-mutations", type=int, default=0)
    p_sel.add_argument("--allow-row-augment", action="store_true")
    _add_path_opts(p_sel)
    p_sel.set_defaults(func=cmd_select)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo sweep")
    p_sim.add_argument("--preset", choices=["desk", "paper"], default="desk")
    p_sim.add_argument("--sweep", choices=["rho", "nnz", "magnitude"], required=True)
    p_sim.add_argument("--grid", required=True, help="comma-separated grid values")
    p_sim.add_argument("--replicates", type=int, required=True)
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--procedures", default=None)
    p_sim.add_argument("--jobs", type=int, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_ana = sub.add_parser("analyze", help="PFER / FDX targets on a dataset")
    p_ana.add_argument("--input", required=True)
    p_ana.add_argument("--response", required=True)
    p_ana.add_argument("--alpha", type=float, default=0.05)
    p_ana.add_argument("--seed", type=int, required=True)
    p_ana.add_argument("--out", required=True)
    p_ana.add_argument("--pfer", type=float, default=None)
    p_ana.add_argument("--fdx-gamma", type=float, default=None)
    p_ana.add_argument("--rw-gamma", type=float, default=None)
    p_ana.add_argument("--k", type=int, default=None)
    p_ana.add_argument("--min-mutations", type=int, default=0)
    p_ana.add_argument("--allow-row-augment", action="store_true")
    _add_path_opts(p_ana)
    p_ana.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 4
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3
    except INPUT_ERRORS as exc:
        print(f"input error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    except KfkoError as exc:
        print(f"input error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

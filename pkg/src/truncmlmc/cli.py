"""Command-line front end: estimators, oracles, and scaling benchmarks to CSV.

All output is deterministic given (config, seed): reals are written with 17
significant digits, rows in fixed grid order, UTF-8, comma-delimited.  Exit
codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .anova import analytic_profile, mc_profile
from .config import (ConfigError, as_int, as_int_list, chain_from_config,
                     integrand_from_config, load_config)
from .markov import measure_decay
from .mlmc import total_budget, work_normalized_variance
from .runner import (FORK_LABELS, CellResult, NumericalFailure,
                     compare_scaling, lemma1_diagnostic, run_config,
                     run_estimator_cell, run_markov_cell)
from .streams import new_stream

RUN_HEADER = ("rep", "value", "cost_units", "level", "level_sum", "level_count")
GRID_HEADER = ("method", "d", "eps", "record", "rep", "value", "cost_units",
               "level", "level_sum", "level_count", "mean", "sample_variance",
               "mean_cost", "wnv", "total_budget")
BENCH_HEADER = ("method", "d", "mean", "sample_variance", "mean_cost", "wnv",
                "total_budget", "theoretical_bound")
ANOVA_HEADER = ("i", "D", "SE", "d_t", "var_f")
DECAY_HEADER = ("i", "msd", "se", "fitted_gamma", "fitted_c_prime", "power_r2",
                "geom_kappa", "geom_theta", "geom_r2")
LEMMA_HEADER = ("family", "d", "lhs", "rhs", "rhs_se", "pass")


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def _merged_config(args) -> dict[str, str]:
    cfg: dict[str, str] = {}
    for path in (getattr(args, "config", None), getattr(args, "integrand_cfg", None)):
        if path:
            cfg.update(load_config(path))
    for attr, key in getattr(args, "override_map", {}).items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = str(value)
    return cfg


def _seed(args, cfg) -> int:
    if args.seed is not None:
        return args.seed
    return as_int(cfg, "seed", 0)


def _threads(args, cfg) -> int:
    if args.threads is not None:
        return max(args.threads, 1)
    return max(as_int(cfg, "threads", 1), 1)


def _out(args, cfg, default: str) -> str:
    return args.out or cfg.get("out") or default


def _run_rows(cell: CellResult):
    for rep, record in enumerate(cell.records):
        if record.per_level:
            for stats in record.per_level:
                yield (rep, record.value, record.cost_units, stats.level,
                       stats.total, stats.count)
        else:
            yield (rep, record.value, record.cost_units, "", "", "")


def cmd_anova(args) -> int:
    cfg = _merged_config(args)
    integrand = integrand_from_config(cfg)
    seed = _seed(args, cfg)
    if args.method == "analytic":
        profile = analytic_profile(integrand)
        se = np.zeros(integrand.dimension + 1)
    else:
        pairs = args.pairs if args.pairs is not None else as_int(cfg, "pairs", 100_000)
        stream = new_stream(seed).fork(FORK_LABELS["anova"]).fork(integrand.dimension)
        profile = mc_profile(integrand, pairs, stream)
        se = profile.se
    out = _out(args, cfg, "profile.csv")
    _write_csv(out, ANOVA_HEADER,
               [(i, profile.D[i], se[i], profile.d_t, profile.var_f)
                for i in range(integrand.dimension + 1)])
    print(f"anova: var_f={_fmt(profile.var_f)} d_t={_fmt(profile.d_t)} -> {out}")
    return 0


def cmd_estimate(args) -> int:
    cfg = _merged_config(args)
    seed = _seed(args, cfg)
    out = _out(args, cfg, "runs.csv")
    if args.method is not None:
        integrand = integrand_from_config(cfg)
        cell = run_estimator_cell(
            args.method, integrand, as_int(cfg, "reps", 1000), new_stream(seed),
            mc_n=as_int(cfg, "mc_n", 1), fix_v=cfg.get("fix_v", "midpoint"),
            fix_v_values=_float_tuple(cfg.get("fix_v_values")))
        _write_csv(out, RUN_HEADER, _run_rows(cell))
        summary = cell.summary
        print(f"estimate {args.method} d={cell.d}: mean={_fmt(summary.mean)} "
              f"variance={_fmt(summary.sample_variance)} "
              f"mean_cost={_fmt(summary.mean_cost)} -> {out}")
        return 0
    # no single method requested: run the configured (method, d, eps) grid
    cells, eps_list = run_config(cfg, seed, _threads(args, cfg))
    rows = []
    for cell in cells:
        for eps in eps_list:
            summary = cell.summary
            rows.append((cell.method, cell.d, eps, "summary", "", "", "", "", "",
                         "", summary.mean, summary.sample_variance,
                         summary.mean_cost, work_normalized_variance(summary),
                         total_budget(summary, eps)))
    for cell in cells:
        for row in _run_rows(cell):
            rows.append((cell.method, cell.d, "", "rep") + row +
                        ("", "", "", "", ""))
    _write_csv(out, GRID_HEADER, rows)
    print(f"estimate grid: {len(cells)} cells -> {out}")
    return 0


def _float_tuple(raw: str | None):
    if raw is None:
        return None
    return tuple(float(p) for p in raw.split(",") if p.strip())


def cmd_bench(args) -> int:
    cfg = _merged_config(args)
    seed = _seed(args, cfg)
    rows = compare_scaling(cfg, seed, _threads(args, cfg))
    out = _out(args, cfg, "bench.csv")
    _write_csv(out, BENCH_HEADER,
               [(r.method, r.d, r.mean, r.sample_variance, r.mean_cost, r.wnv,
                 r.total_budget, r.theoretical_bound) for r in rows])
    print(f"bench: {len(rows)} rows -> {out}")
    return 0


def cmd_markov(args) -> int:
    cfg = _merged_config(args)
    seed = _seed(args, cfg)
    root = new_stream(seed)
    if args.mode == "decay":
        model, _ = chain_from_config(cfg)
        i_values = as_int_list(cfg, "decay.i", ...)
        n = as_int(cfg, "decay.n", 10_000)
        stream = root.fork(FORK_LABELS["decay"]).fork(model.horizon)
        report = measure_decay(model, i_values, n, stream)
        out = _out(args, cfg, "decay.csv")
        _write_csv(out, DECAY_HEADER,
                   [(i, report.msd[k], report.se[k], report.fitted_gamma,
                     report.fitted_c_prime, report.power_r2, report.geom_kappa,
                     report.geom_theta, report.geom_r2)
                    for k, i in enumerate(report.i_values)])
        print(f"markov decay: gamma_hat={_fmt(report.fitted_gamma)} "
              f"kappa_hat={_fmt(report.geom_kappa)} -> {out}")
        return 0
    d = as_int(cfg, "chain.d")
    cell = run_markov_cell(cfg, d, as_int(cfg, "reps", 1000), root)
    out = _out(args, cfg, "markov.csv")
    _write_csv(out, RUN_HEADER, _run_rows(cell))
    summary = cell.summary
    print(f"markov d={d}: mean={_fmt(summary.mean)} "
          f"variance={_fmt(summary.sample_variance)} "
          f"mean_cost={_fmt(summary.mean_cost)} -> {out}")
    return 0


def cmd_lemma1(args) -> int:
    cfg = _merged_config(args)
    seed = _seed(args, cfg)
    d_grid = as_int_list(cfg, "d_grid", None)
    rows = lemma1_diagnostic(cfg, seed, d_grid=d_grid,
                             reps=as_int(cfg, "reps", 2000))
    out = _out(args, cfg, "lemma1.csv")
    _write_csv(out, LEMMA_HEADER,
               [(r.family, r.d, r.lhs, r.rhs, r.rhs_se, r.passed) for r in rows])
    print(f"lemma1: {sum(r.passed for r in rows)}/{len(rows)} passed -> {out}")
    return 0


def _add_integrand_flags(parser) -> dict[str, str]:
    parser.add_argument("--integrand", dest="integrand_cfg", metavar="CFG",
                        help="flat config file with integrand.* keys")
    parser.add_argument("--family", choices=("additive", "product"))
    parser.add_argument("--d", type=int)
    parser.add_argument("--coeffs", metavar="C1,C2,...")
    parser.add_argument("--decay-r", dest="decay_r", type=float)
    return {"family": "integrand.family", "d": "integrand.d",
            "coeffs": "integrand.coeffs", "decay_r": "integrand.decay_r"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="truncmlmc",
        description="Multilevel Monte Carlo estimators whose cost tracks the "
                    "truncation dimension; deterministic CSV benchmarks.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="root seed (decimal 64-bit integer)")
    common.add_argument("--out", help="output CSV path")
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--threads", type=int, help="concurrent grid cells")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("anova", parents=[common],
                       help="residual-variance profile D(0..d) and d_t to CSV")
    overrides = _add_integrand_flags(p)
    p.add_argument("--method", choices=("analytic", "mc"), default="analytic")
    p.add_argument("--pairs", type=int, help="sample pairs per index (mc method)")
    p.set_defaults(handler=cmd_anova, override_map=overrides)

    p = sub.add_parser("estimate", parents=[common],
                       help="run one estimator or the configured grid")
    overrides = dict(_add_integrand_flags(p))
    p.add_argument("--method", choices=("mc", "mlmc", "mlmc-fixed"),
                   help="single estimator; omit to run the config's method grid")
    p.add_argument("--reps", type=int)
    p.add_argument("--mc-n", dest="mc_n", type=int,
                   help="points per replication for the mc method")
    p.add_argument("--fix-v", dest="fix_v", choices=("midpoint", "sample", "explicit"))
    p.add_argument("--v-values", dest="fix_v_values", metavar="V1,V2,...",
                   help="explicit base point for --fix-v explicit")
    overrides.update({"reps": "reps", "mc_n": "mc_n", "fix_v": "fix_v",
                      "fix_v_values": "fix_v_values"})
    p.set_defaults(handler=cmd_estimate, override_map=overrides)

    p = sub.add_parser("bench", parents=[common],
                       help="method/dimension scaling table at one tolerance")
    overrides = dict(_add_integrand_flags(p))
    p.add_argument("--d-grid", dest="d_grid", metavar="D1,D2,...")
    p.add_argument("--eps", type=float)
    p.add_argument("--methods", metavar="M1,M2,...")
    p.add_argument("--reps", type=int)
    p.add_argument("--mc-n", dest="mc_n", type=int)
    overrides.update({"d_grid": "d_grid", "eps": "eps", "methods": "methods",
                      "reps": "reps", "mc_n": "mc_n"})
    p.set_defaults(handler=cmd_bench, override_map=overrides)

    p = sub.add_parser("markov", parents=[common],
                       help="chain-functional estimator or restart-gap decay")
    p.add_argument("mode", nargs="?", choices=("estimate", "decay"),
                   default="estimate")
    p.add_argument("--preset", choices=("lindley",))
    p.add_argument("--d", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--time-varying", dest="time_varying", action="store_const",
                   const="true")
    p.add_argument("--reps", type=int)
    p.add_argument("--i", dest="decay_i", metavar="I1,I2,...",
                   help="restart depths for decay mode")
    p.add_argument("--n", dest="decay_n", type=int,
                   help="coupled paths per depth for decay mode")
    p.set_defaults(handler=cmd_markov, override_map={
        "preset": "chain.preset", "d": "chain.d", "gamma": "chain.gamma",
        "a": "chain.a", "b": "chain.b", "time_varying": "chain.time_varying",
        "reps": "reps", "decay_i": "decay.i", "decay_n": "decay.n"})

    p = sub.add_parser("lemma1", parents=[common],
                       help="level-budget inequality with measured level variances")
    overrides = dict(_add_integrand_flags(p))
    p.add_argument("--d-grid", dest="d_grid", metavar="D1,D2,...")
    p.add_argument("--reps", type=int)
    overrides.update({"d_grid": "d_grid", "reps": "reps"})
    p.set_defaults(handler=cmd_lemma1, override_map=overrides)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Config-driven experiment execution: estimator cells, scaling tables, diagnostics.

Every cell of the (method, d) grid derives its randomness from the root seed
through fixed fork labels, so adding methods or grid points never perturbs the
draws of existing cells, and cells may run concurrently without affecting any
output byte.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .anova import analytic_profile
from .config import (METHODS, ConfigError, as_choice, as_float, as_float_list,
                     as_int, as_int_list, as_str_list, chain_from_config,
                     integrand_from_config)
from .integrands import Integrand
from .markov import estimate_chain_mlmc, markov_schedule
from .mlmc import (EstimateRecord, EstimateSummary, check_level_budget_bound,
                   estimate_mlmc, estimate_mlmc_fixed,
                   level_budget_rhs_se, level_variance_estimates, standard_mc,
                   summarize, total_budget, truncation_schedule,
                   work_normalized_variance)
from .streams import CostLedger, UniformStream, new_stream

# Fork labels under the root seed, one per randomness consumer.  Fixed for
# output stability; never reuse or renumber.
FORK_LABELS = {
    "mc": 0,
    "mlmc": 1,
    "mlmc-fixed": 2,
    "sample-v": 3,
    "anova": 4,
    "decay": 5,
    "markov": 6,
    "lemma1": 7,
}


class NumericalFailure(RuntimeError):
    """A cell produced a non-finite estimate; identifies the offending cell."""


@dataclass(frozen=True)
class BenchRow:
    """One (method, d) cell of a scaling comparison."""

    method: str
    d: int
    mean: float
    sample_variance: float
    mean_cost: float
    wnv: float
    total_budget: float
    theoretical_bound: float | None


@dataclass(frozen=True)
class CellResult:
    method: str
    d: int
    records: tuple[EstimateRecord, ...]
    summary: EstimateSummary


def resolve_fixed_point(mode: str, d: int, root: UniformStream,
                        explicit=None) -> np.ndarray:
    """Base point for the fixed-suffix estimator: midpoint, sampled, or given."""
    if mode == "midpoint":
        return np.full(d, 0.5)
    if mode == "sample":
        return root.fork(FORK_LABELS["sample-v"]).fork(d).draw(d)
    if mode == "explicit":
        v = np.asarray(explicit if explicit is not None else (), dtype=float)
        if v.shape != (d,):
            raise ConfigError(f"config key 'fix_v_values': expected {d} entries")
        return v
    raise ConfigError(f"config key 'fix_v': unknown mode {mode!r}")


def variance_bound(integrand: Integrand) -> float | None:
    """16 ceil(log2 d)/d * d_t * var_f when the analytic profile exists."""
    if integrand.family is None:
        return None
    profile = analytic_profile(integrand)
    d = integrand.dimension
    return 16.0 * math.ceil(math.log2(d)) / d * profile.d_t * profile.var_f


def run_estimator_cell(method: str, integrand: Integrand, reps: int,
                       root: UniformStream, mc_n: int = 1,
                       fix_v: str = "midpoint", fix_v_values=None) -> CellResult:
    """Run one (method, d) cell on its labelled stream and summarize it."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    if reps < 2:
        raise ConfigError("config key 'reps': need at least 2 replications")
    d = integrand.dimension
    if method == "mc":
        def estimator(stream):
            return standard_mc(integrand, mc_n, stream)
    elif method == "mlmc":
        schedule = truncation_schedule(d)

        def estimator(stream):
            return estimate_mlmc(integrand, schedule, stream)
    else:
        schedule = truncation_schedule(d)
        v = resolve_fixed_point(fix_v, d, root, fix_v_values)

        def estimator(stream):
            return estimate_mlmc_fixed(integrand, v, schedule, stream)

    # detached ledger: cells may run on threads, and per-replication cost
    # deltas must not see other cells' increments
    cell_stream = root.fork(FORK_LABELS[method]).fork(d, ledger=CostLedger())
    records = tuple(estimator(cell_stream.fork(j)) for j in range(reps))
    values = np.array([r.value for r in records])
    if not np.all(np.isfinite(values)):
        raise NumericalFailure(f"cell method={method} d={d}: non-finite estimate")
    return CellResult(method=method, d=d, records=records, summary=summarize(records))


def run_markov_cell(cfg: dict[str, str], d: int, reps: int,
                    root: UniformStream) -> CellResult:
    model, gamma = chain_from_config(cfg, d)
    cell_stream = root.fork(FORK_LABELS["markov"]).fork(d, ledger=CostLedger())
    records = tuple(estimate_chain_mlmc(model, gamma, cell_stream.fork(j))
                    for j in range(reps))
    values = np.array([r.value for r in records])
    if not np.all(np.isfinite(values)):
        raise NumericalFailure(f"cell method=markov d={d}: non-finite estimate")
    return CellResult(method="markov", d=d, records=records, summary=summarize(records))


def _cells_in_parallel(tasks, threads: int):
    """Evaluate no-argument callables, preserving task order regardless of
    completion order."""
    if threads <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(task) for task in tasks]
        return [f.result() for f in futures]


def run_config(cfg: dict[str, str], seed: int, threads: int = 1):
    """Execute all requested (method, d, eps) cells of an integrand experiment.

    Returns (cell results in grid order, eps list); the CSV layer turns these
    into per-replication rows plus one summary row per (method, d, eps).
    """
    methods = as_str_list(cfg, "methods", ("mc", "mlmc"))
    if not methods:
        raise ConfigError("config key 'methods': empty method list")
    for method in methods:
        if method not in METHODS:
            raise ConfigError(f"config key 'methods': unknown method {method!r}")
    d_grid = as_int_list(cfg, "d_grid", None)
    if d_grid is None:
        d_grid = (as_int(cfg, "integrand.d"),)
    if not d_grid:
        raise ConfigError("config key 'd_grid': empty grid")
    eps_list = as_float_list(cfg, "eps", (0.01,))
    if any(e <= 0 for e in eps_list):
        raise ConfigError("config key 'eps': tolerances must be positive")
    reps = as_int(cfg, "reps", 1000)
    mc_n = as_int(cfg, "mc_n", 1)
    fix_v = as_choice(cfg, "fix_v", {"midpoint", "sample", "explicit"}, "midpoint")
    fix_v_values = as_float_list(cfg, "fix_v_values", None)
    root = new_stream(seed)

    tasks = []
    for method in methods:
        for d in d_grid:
            integrand = integrand_from_config(cfg, d)
            tasks.append(lambda method=method, integrand=integrand:
                         run_estimator_cell(method, integrand, reps, root, mc_n,
                                            fix_v, fix_v_values))
    return _cells_in_parallel(tasks, threads), eps_list


def compare_scaling(cfg: dict[str, str], seed: int, threads: int = 1) -> list[BenchRow]:
    """Total budgets across the d grid at one tolerance, per method.

    MLMC rows also carry the analytic variance bound driven by the truncation
    dimension, the quantity the measured variance is expected to respect.
    """
    eps_list = as_float_list(cfg, "eps", (0.01,))
    if len(eps_list) != 1:
        raise ConfigError("config key 'eps': scaling comparison expects one tolerance")
    eps = eps_list[0]
    if eps <= 0:
        raise ConfigError("config key 'eps': tolerance must be positive")
    cells, _ = run_config({**cfg, "eps": str(eps)}, seed, threads)
    rows = []
    for cell in cells:
        integrand = integrand_from_config(cfg, cell.d)
        bound = variance_bound(integrand) if cell.method != "mc" else None
        rows.append(BenchRow(
            method=cell.method, d=cell.d, mean=cell.summary.mean,
            sample_variance=cell.summary.sample_variance,
            mean_cost=cell.summary.mean_cost,
            wnv=work_normalized_variance(cell.summary),
            total_budget=total_budget(cell.summary, eps),
            theoretical_bound=bound))
    return rows


@dataclass(frozen=True)
class LevelBudgetRow:
    """Level-budget inequality outcome for one (family, d)."""

    family: str
    d: int
    lhs: float
    rhs: float
    rhs_se: float
    passed: bool


def lemma1_diagnostic(cfg: dict[str, str], seed: int, d_grid=None,
                      reps: int | None = None) -> list[LevelBudgetRow]:
    """Check the level-budget inequality with measured level variances.

    Level variances come from the fixed-base-point estimator (independent
    levels, so the inequality's hypotheses hold for its levels), the residual
    sequence from the analytic profile.  Pass requires lhs <= rhs + 4 SE(rhs).
    """
    if d_grid is None:
        d_grid = as_int_list(cfg, "d_grid", None) or (as_int(cfg, "integrand.d"),)
    if reps is None:
        reps = as_int(cfg, "reps", 2000)
    root = new_stream(seed)
    rows = []
    for d in d_grid:
        integrand = integrand_from_config(cfg, d)
        if integrand.family is None:
            raise ConfigError("level-budget diagnostic needs a family integrand")
        schedule = truncation_schedule(d)
        v = np.full(d, 0.5)
        cell_stream = root.fork(FORK_LABELS["lemma1"]).fork(d)
        records = [estimate_mlmc_fixed(integrand, v, schedule, cell_stream.fork(j))
                   for j in range(reps)]
        summary = summarize(records)
        V = level_variance_estimates(summary.per_level)
        counts = np.array([ls.count for ls in summary.per_level], dtype=float)
        V_se = V * np.sqrt(2.0 / np.maximum(counts - 1.0, 1.0))
        nu = analytic_profile(integrand).D
        rhs_se = level_budget_rhs_se(schedule.m, V, V_se)
        report = check_level_budget_bound(schedule.m, V, nu, slack=4.0 * rhs_se)
        rows.append(LevelBudgetRow(family=integrand.family, d=d, lhs=report.lhs,
                                   rhs=report.rhs, rhs_se=rhs_se,
                                   passed=report.passed))
    return rows

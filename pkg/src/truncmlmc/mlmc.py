"""Multilevel Monte Carlo estimators keyed to prefix truncation.

The flagship estimator draws one base point, then telescopes over levels
whose prefix lengths double: the level-l increment evaluates the integrand at
a fresh prefix of length m_l spliced onto the base point, minus the same with
prefix length m_{l-1}.  Only the prefix is redrawn, so level l costs O(m_l)
draw units and a whole replication stays within 9d draw units while its
variance is governed by the truncation dimension rather than d.

The level-0 term is identically zero by convention; level 1 therefore
contributes the plain spliced value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .integrands import Integrand
from .streams import CostLedger, UniformStream


@dataclass(frozen=True)
class LevelSchedule:
    """Prefix lengths m_0..m_L and per-level replication counts n_1..n_L.

    ``m`` is strictly increasing with m_0 = 0 and m_L = d; every n_l >= 1.
    """

    m: tuple[int, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        m, n = self.m, self.n
        if len(m) < 2 or m[0] != 0:
            raise ValueError("prefix lengths must start at m_0 = 0")
        if any(m[k + 1] <= m[k] for k in range(len(m) - 1)):
            raise ValueError("prefix lengths must be strictly increasing")
        if len(n) != len(m) - 1:
            raise ValueError("need one replication count per level")
        if any(nl < 1 for nl in n):
            raise ValueError("replication counts must be positive")

    @property
    def levels(self) -> int:
        return len(self.n)

    @property
    def dimension(self) -> int:
        return self.m[-1]


@dataclass(frozen=True)
class LevelStats:
    """Running sums of one level's increment samples."""

    level: int
    total: float
    total_sq: float
    count: int


@dataclass(frozen=True)
class EstimateRecord:
    """One replication: value, exact unit costs, and optional per-level sums."""

    value: float
    cost_units: int
    draw_units: int
    step_units: int
    eval_units: int
    per_level: tuple[LevelStats, ...] | None = None


@dataclass(frozen=True)
class EstimateSummary:
    """Aggregate of R independent replications (unbiased variance, R-1 divisor)."""

    mean: float
    sample_variance: float
    mean_cost: float
    replications: int
    per_level: tuple[LevelStats, ...] | None = None


def dyadic_prefixes(d: int) -> tuple[int, ...]:
    """Prefix lengths (0, 1, 3, ..., 2^(L-1)-1, d) with L = ceil(log2 d)."""
    if d < 2:
        raise ValueError("dyadic schedules need dimension at least 2; "
                         "plain averaging covers d = 1")
    levels = (d - 1).bit_length()
    return tuple(2 ** l - 1 for l in range(levels)) + (d,)


def truncation_schedule(d: int) -> LevelSchedule:
    """Dyadic prefixes with n_l = ceil((d/L) 2^-l) replications per level."""
    m = dyadic_prefixes(d)
    levels = len(m) - 1
    n = tuple(-(-d // (levels << l)) for l in range(1, levels + 1))
    return LevelSchedule(m=m, n=n)


def _run_levels(integrand: Integrand, suffix_source: np.ndarray,
                schedule: LevelSchedule, stream: UniformStream,
                ledger: CostLedger) -> tuple[float, tuple[LevelStats, ...]]:
    """Telescoping sum over levels against a fixed suffix source."""
    d = integrand.dimension
    value = 0.0
    stats = []
    for level in range(1, schedule.levels + 1):
        m_hi = schedule.m[level]
        m_lo = schedule.m[level - 1]
        n_l = schedule.n[level - 1]
        prefixes = stream.draw_matrix(n_l, m_hi)
        points = np.broadcast_to(suffix_source, (n_l, d)).copy()
        points[:, :m_hi] = prefixes
        f_hi = integrand.eval_batch(points, ledger)
        if level == 1:
            diffs = f_hi  # level-0 term is identically zero
        else:
            points[:, m_lo:m_hi] = suffix_source[m_lo:m_hi]
            diffs = f_hi - integrand.eval_batch(points, ledger)
        value += float(diffs.mean())
        stats.append(LevelStats(level=level, total=float(diffs.sum()),
                                total_sq=float(np.dot(diffs, diffs)), count=n_l))
    return value, tuple(stats)


def record_from_snapshot(value: float, before: tuple[int, int, int],
                         ledger: CostLedger,
                         per_level: tuple[LevelStats, ...] | None = None) -> EstimateRecord:
    """Close out one replication against the ledger state captured at its start."""
    draws, steps, evals = (a - b for a, b in zip(ledger.snapshot(), before))
    return EstimateRecord(value=value, cost_units=draws + steps + evals,
                          draw_units=draws, step_units=steps, eval_units=evals,
                          per_level=per_level)


def estimate_mlmc(integrand: Integrand, schedule: LevelSchedule,
                  stream: UniformStream) -> EstimateRecord:
    """One replication of the truncation-coupled estimator with a random base point.

    Draws the base point once (d draws, one payoff evaluation up front, as the
    cost model assumes), then runs the level telescope with all levels sharing
    that base point.  Unbiased for the integral for any level schedule.
    """
    if schedule.dimension != integrand.dimension:
        raise ValueError("schedule dimension must match the integrand")
    ledger = stream.ledger
    before = ledger.snapshot()
    u_prime = stream.draw(integrand.dimension)
    integrand.eval_batch(u_prime[None, :], ledger)  # base payoff computed once, cached
    value, stats = _run_levels(integrand, u_prime, schedule, stream, ledger)
    return record_from_snapshot(value, before, ledger, stats)


def estimate_mlmc_fixed(integrand: Integrand, v, schedule: LevelSchedule,
                        stream: UniformStream) -> EstimateRecord:
    """One replication with the base point fixed to v (no base-point cost).

    Unbiased for the integral for every fixed v; since nothing random is
    shared across levels, its variance is exactly the sum of per-level
    increment variances divided by the replication counts.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (integrand.dimension,):
        raise ValueError(f"fixed suffix must have length {integrand.dimension}")
    if np.any((v < 0.0) | (v > 1.0)):
        raise ValueError("fixed suffix must lie in the unit cube")
    if schedule.dimension != integrand.dimension:
        raise ValueError("schedule dimension must match the integrand")
    ledger = stream.ledger
    before = ledger.snapshot()
    value, stats = _run_levels(integrand, v, schedule, stream, ledger)
    return record_from_snapshot(value, before, ledger, stats)


def standard_mc(integrand: Integrand, n: int, stream: UniformStream) -> EstimateRecord:
    """Plain average of f over n uniform points (n*d draws, n payoff evaluations)."""
    if n < 1:
        raise ValueError("sample count must be positive")
    ledger = stream.ledger
    before = ledger.snapshot()
    points = stream.draw_matrix(n, integrand.dimension)
    value = float(integrand.eval_batch(points, ledger).mean())
    return record_from_snapshot(value, before, ledger)


def pool_level_stats(records: Sequence[EstimateRecord]) -> tuple[LevelStats, ...] | None:
    """Merge per-level sums across replications (associative accumulators)."""
    if not records or records[0].per_level is None:
        return None
    levels = len(records[0].per_level)
    totals = np.zeros(levels)
    totals_sq = np.zeros(levels)
    counts = np.zeros(levels, dtype=int)
    for rec in records:
        if rec.per_level is None or len(rec.per_level) != levels:
            return None
        for k, ls in enumerate(rec.per_level):
            totals[k] += ls.total
            totals_sq[k] += ls.total_sq
            counts[k] += ls.count
    return tuple(LevelStats(level=k + 1, total=float(totals[k]),
                            total_sq=float(totals_sq[k]), count=int(counts[k]))
                 for k in range(levels))


def summarize(records: Sequence[EstimateRecord]) -> EstimateSummary:
    """Mean, unbiased sample variance, and mean cost of replication records."""
    if len(records) < 2:
        raise ValueError("summaries need at least 2 replications")
    values = np.array([r.value for r in records], dtype=float)
    costs = np.array([r.cost_units for r in records], dtype=float)
    return EstimateSummary(mean=float(values.mean()),
                           sample_variance=float(values.var(ddof=1)),
                           mean_cost=float(costs.mean()),
                           replications=len(records),
                           per_level=pool_level_stats(records))


def replicate(estimator: Callable[[UniformStream], EstimateRecord], reps: int,
              stream: UniformStream) -> EstimateSummary:
    """Run ``reps`` independent replications on forked streams and summarize."""
    if reps < 2:
        raise ValueError("need at least 2 replications")
    return summarize([estimator(stream.fork(j)) for j in range(reps)])


def level_variance_estimates(per_level: Sequence[LevelStats]) -> np.ndarray:
    """Unbiased per-level increment variances from pooled sums."""
    out = np.empty(len(per_level))
    for k, ls in enumerate(per_level):
        if ls.count < 2:
            raise ValueError(f"level {ls.level} has fewer than 2 samples")
        out[k] = (ls.total_sq - ls.total ** 2 / ls.count) / (ls.count - 1)
    return np.maximum(out, 0.0)


def predicted_variance(summary: EstimateSummary, schedule: LevelSchedule) -> float:
    """sum_l V_l / n_l from pooled level sums; exact in expectation for
    estimators whose levels are mutually independent (fixed base point, chains)."""
    if summary.per_level is None:
        raise ValueError("summary carries no per-level sums")
    v = level_variance_estimates(summary.per_level)
    return float(np.sum(v / np.asarray(schedule.n, dtype=float)))


def samples_needed(variance: float, eps: float) -> int:
    """Replications needed to push the averaged variance to eps^2: ceil(var/eps^2)."""
    if variance <= 0.0 or eps <= 0.0:
        raise ValueError("variance and eps must be positive")
    return math.ceil(variance / eps ** 2)


def work_normalized_variance(summary: EstimateSummary) -> float:
    """Mean cost times sample variance; invariant under trivial averaging."""
    return summary.mean_cost * summary.sample_variance


def total_budget(summary: EstimateSummary, eps: float) -> float:
    """Expected cost to reach variance eps^2 by independent replication."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    return samples_needed(summary.sample_variance, eps) * summary.mean_cost


def optimal_allocation(V, t, target_variance: float) -> np.ndarray:
    """Integer n_l = ceil(lambda sqrt(V_l/t_l)) meeting sum V_l/n_l <= target.

    Replication counts proportional to sqrt(V_l/t_l) minimize total cost at a
    given variance; rounding up preserves the variance guarantee.
    """
    V = np.asarray(V, dtype=float)
    t = np.asarray(t, dtype=float)
    if V.shape != t.shape or V.ndim != 1:
        raise ValueError("V and t must be vectors of equal length")
    if np.any(t <= 0.0) or np.any(V < 0.0) or target_variance <= 0.0:
        raise ValueError("costs must be positive, variances nonnegative, target positive")
    scale = float(np.sum(np.sqrt(V * t)))
    if scale == 0.0:
        return np.ones(V.size, dtype=int)
    lam = scale / target_variance
    return np.maximum(np.ceil(lam * np.sqrt(V / t)).astype(int), 1)


@dataclass(frozen=True)
class LevelBudgetReport:
    """Outcome of the level-budget inequality sum(nu) <= (sum sqrt(m_l V_l))^2."""

    lhs: float
    rhs: float
    slack: float
    passed: bool


def check_level_budget_bound(m, V, nu, slack: float = 0.0) -> LevelBudgetReport:
    """Check sum_i nu_i <= (sum_l sqrt(m_l V_l))^2 + slack.

    ``nu`` must be nonincreasing with nu_d = 0 and, index-by-index at the
    prefix lengths, lower-bound the variance unexplained by each level.  The
    right-hand side is the cost-variance product of an optimally allocated
    level scheme whose level costs are the prefix lengths.
    """
    m = np.asarray(m, dtype=int)
    V = np.asarray(V, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if m[0] != 0 or np.any(np.diff(m) <= 0):
        raise ValueError("prefix lengths must be strictly increasing from 0")
    if V.size != m.size - 1:
        raise ValueError("need one variance per level")
    if nu.size != m[-1] + 1:
        raise ValueError("nu must have one entry per index 0..d")
    if np.any(np.diff(nu) > 1e-12 * max(abs(nu[0]), 1.0)):
        raise ValueError("nu must be nonincreasing")
    if nu[-1] != 0.0:
        raise ValueError("nu must end at 0")
    lhs = float(nu.sum())
    rhs = float(np.sum(np.sqrt(m[1:] * np.maximum(V, 0.0))) ** 2)
    return LevelBudgetReport(lhs=lhs, rhs=rhs, slack=slack, passed=lhs <= rhs + slack)


def level_budget_rhs_se(m, V, V_se) -> float:
    """Delta-method standard error of (sum_l sqrt(m_l V_l))^2 from V_l standard errors."""
    m = np.asarray(m, dtype=float)[1:]
    V = np.asarray(V, dtype=float)
    V_se = np.asarray(V_se, dtype=float)
    root_sum = float(np.sum(np.sqrt(m * V)))
    positive = V > 0.0
    grad = np.zeros_like(V)
    grad[positive] = root_sum * np.sqrt(m[positive] / V[positive])
    return float(np.sqrt(np.sum((grad * V_se) ** 2)))

"""Time-varying Markov chain functionals and their multilevel estimation.

A chain X_0..X_d evolves by X_{t+1} = step(t, X_t, Y_t) with independent
uniform innovations Y_t, and the target is the expected terminal payoff.  The
level-l approximation restarts the chain from its initial state m_l steps
before the horizon and reuses the final m_l innovations, so it can be
simulated in O(m_l) time and couples tightly to the full chain whenever the
chain forgets its past.  Coordinates are indexed backwards in time
(coordinate k of the equivalent cube integrand is the innovation k steps
before the end), which puts the influential inputs first.

Step and payoff callables operate elementwise on numpy arrays, so whole
batches of paths advance per call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .integrands import Integrand
from .mlmc import (EstimateRecord, LevelSchedule, LevelStats, dyadic_prefixes,
                   record_from_snapshot)
from .streams import CostLedger, UniformStream

LINDLEY_A = -0.6
LINDLEY_B = 0.4


@dataclass(frozen=True)
class ChainModel:
    """Time-varying chain: state update per time index, payoff at the horizon.

    ``step(t, states, uniforms)`` and ``payoff(states)`` must be deterministic,
    constant-cost, and elementwise over array arguments.
    """

    horizon: int
    initial_state: float
    step: Callable[[int, np.ndarray, np.ndarray], np.ndarray]
    payoff: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ChainPath:
    """One simulated trajectory with its innovations and terminal payoff."""

    states: np.ndarray
    uniforms: np.ndarray
    payoff: float


@dataclass(frozen=True)
class DecayReport:
    """Mean squared payoff gap between the chain and its i-step restarts.

    Least-squares fits of log(msd): ``fitted_gamma``/``fitted_c_prime`` from
    regression on log(i+1) (power law), ``geom_kappa``/``geom_theta`` from
    regression on i (geometric).
    """

    i_values: tuple[int, ...]
    msd: np.ndarray
    se: np.ndarray
    fitted_gamma: float
    fitted_c_prime: float
    power_r2: float
    geom_kappa: float
    geom_theta: float
    geom_r2: float


def simulate_chain(model: ChainModel, stream: UniformStream) -> ChainPath:
    """Run the chain over its full horizon: d draws, d steps, one payoff."""
    d = model.horizon
    ledger = stream.ledger
    ys = stream.draw(d)
    states = np.empty(d + 1)
    states[0] = model.initial_state
    x = np.float64(model.initial_state)
    for t in range(d):
        x = model.step(t, x, ys[t])
        states[t + 1] = x
    ledger.step_applications += d
    ledger.payoff_evals += 1
    return ChainPath(states=states, uniforms=ys, payoff=float(model.payoff(x)))


def simulate_restart(model: ChainModel, i: int, uniforms,
                     ledger: CostLedger | None = None) -> float:
    """Payoff of the chain restarted from its initial state i steps before the end.

    ``uniforms`` supplies the final i innovations in time order; the restart
    applies exactly i steps, so it costs O(i).  With i = d and the original
    innovations this reproduces the full chain exactly.
    """
    d = model.horizon
    if not 0 <= i <= d:
        raise ValueError(f"restart depth i={i} outside [0, {d}]")
    uniforms = np.asarray(uniforms, dtype=float)
    if uniforms.shape != (i,):
        raise ValueError(f"expected {i} innovations, got shape {uniforms.shape}")
    x = np.float64(model.initial_state)
    for k in range(i):
        x = model.step(d - i + k, x, uniforms[k])
    if ledger is not None:
        ledger.step_applications += i
        ledger.payoff_evals += 1
    return float(model.payoff(x))


def coupled_level_pair(model: ChainModel, m_hi: int, m_lo: int,
                       stream: UniformStream) -> float:
    """One coupled increment: restart payoff at depth m_hi minus depth m_lo.

    Both restarts share the freshly drawn final innovations (the shallow one
    uses the trailing m_lo of them), which is what keeps the increment small.
    The depth-0 term is the constant 0 by the level-0 convention.
    """
    if not 0 <= m_lo < m_hi <= model.horizon:
        raise ValueError("need 0 <= m_lo < m_hi <= horizon")
    ys = stream.draw(m_hi)
    ledger = stream.ledger
    hi = simulate_restart(model, m_hi, ys, ledger)
    if m_lo == 0:
        return hi
    return hi - simulate_restart(model, m_lo, ys[m_hi - m_lo:], ledger)


def markov_schedule(d: int, gamma: float) -> LevelSchedule:
    """Dyadic prefixes with n_l = ceil(d 2^(l(gamma-1)/2)) replications per level.

    Requires gamma < -1: for slower payoff-gap decay the level variance sums
    diverge and no schedule of this shape controls the variance.
    """
    if gamma >= -1.0:
        raise ValueError("decay exponent gamma must be below -1")
    m = dyadic_prefixes(d)
    levels = len(m) - 1
    n = tuple(math.ceil(d * 2.0 ** (l * (gamma - 1.0) / 2.0))
              for l in range(1, levels + 1))
    return LevelSchedule(m=m, n=n)


def estimate_chain_mlmc(model: ChainModel, gamma: float, stream: UniformStream,
                        schedule: LevelSchedule | None = None) -> EstimateRecord:
    """One replication of the restart-coupled multilevel estimator.

    Levels run on forked streams and are mutually independent; within a level
    the n_l coupled increments are iid, so the estimator variance is exactly
    sum_l V_l / n_l.  Unbiased for the expected terminal payoff.
    """
    d = model.horizon
    if schedule is None:
        schedule = markov_schedule(d, gamma)
    if schedule.dimension != d:
        raise ValueError("schedule dimension must match the chain horizon")
    ledger = stream.ledger
    before = ledger.snapshot()
    value = 0.0
    stats = []
    for level in range(1, schedule.levels + 1):
        m_hi = schedule.m[level]
        m_lo = schedule.m[level - 1]
        n_l = schedule.n[level - 1]
        substream = stream.fork(level)
        ys = substream.draw_matrix(n_l, m_hi)
        hi = np.full(n_l, float(model.initial_state))
        lo = np.full(n_l, float(model.initial_state))
        start_lo = m_hi - m_lo
        for k in range(m_hi):
            t = d - m_hi + k
            hi = model.step(t, hi, ys[:, k])
            ledger.step_applications += n_l
            if k >= start_lo and m_lo > 0:
                lo = model.step(t, lo, ys[:, k])
                ledger.step_applications += n_l
        diffs = np.asarray(model.payoff(hi), dtype=float)
        ledger.payoff_evals += n_l
        if m_lo > 0:
            diffs = diffs - np.asarray(model.payoff(lo), dtype=float)
            ledger.payoff_evals += n_l
        value += float(diffs.mean())
        stats.append(LevelStats(level=level, total=float(diffs.sum()),
                                total_sq=float(np.dot(diffs, diffs)), count=n_l))
    return record_from_snapshot(value, before, ledger, tuple(stats))


def standard_mc_chain(model: ChainModel, n: int, stream: UniformStream) -> EstimateRecord:
    """Average terminal payoff over n full-horizon paths, advanced in lockstep."""
    if n < 1:
        raise ValueError("path count must be positive")
    ledger = stream.ledger
    before = ledger.snapshot()
    states = np.full(n, float(model.initial_state))
    for t in range(model.horizon):
        states = model.step(t, states, stream.draw(n))
        ledger.step_applications += n
    values = np.asarray(model.payoff(states), dtype=float)
    ledger.payoff_evals += n
    return record_from_snapshot(float(values.mean()), before, ledger)


def _loglinear_fit(x: np.ndarray, log_y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(x, log_y, 1)
    residuals = log_y - (slope * x + intercept)
    ss_res = float(np.dot(residuals, residuals))
    centered = log_y - log_y.mean()
    ss_tot = float(np.dot(centered, centered))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else float(ss_res == 0.0)
    return float(slope), float(intercept), r2


def measure_decay(model: ChainModel, i_values: Sequence[int], n: int,
                  stream: UniformStream) -> DecayReport:
    """Estimate the mean squared payoff gap to the i-step restart for each i.

    All restarts ride along one batch of full-chain paths, sharing the
    trailing innovations.  Both decay fits are least squares on log(msd) over
    the i with positive estimates.
    """
    if n < 2:
        raise ValueError("need at least 2 coupled paths")
    d = model.horizon
    i_vals = tuple(int(i) for i in i_values)
    if any(i < 0 or i > d for i in i_vals):
        raise ValueError(f"restart depths must lie in [0, {d}]")
    ledger = stream.ledger
    x0 = float(model.initial_state)
    full = np.full(n, x0)
    restarts: dict[int, np.ndarray | None] = {i: None for i in i_vals}
    for t in range(d):
        y = stream.draw(n)
        full = model.step(t, full, y)
        ledger.step_applications += n
        for i in i_vals:
            if t == d - i:
                restarts[i] = np.full(n, x0)
            if restarts[i] is not None:
                restarts[i] = model.step(t, restarts[i], y)
                ledger.step_applications += n
    pf_full = np.asarray(model.payoff(full), dtype=float)
    ledger.payoff_evals += n
    msd = np.empty(len(i_vals))
    se = np.empty(len(i_vals))
    for k, i in enumerate(i_vals):
        states = restarts[i] if restarts[i] is not None else np.full(n, x0)
        sq = (pf_full - np.asarray(model.payoff(states), dtype=float)) ** 2
        ledger.payoff_evals += n
        msd[k] = sq.mean()
        se[k] = sq.std(ddof=1) / math.sqrt(n)

    keep = msd > 0.0
    if np.count_nonzero(keep) >= 2:
        iv = np.asarray(i_vals, dtype=float)[keep]
        log_msd = np.log(msd[keep])
        gamma, log_c, power_r2 = _loglinear_fit(np.log(iv + 1.0), log_msd)
        log_kappa, log_theta, geom_r2 = _loglinear_fit(iv, log_msd)
    else:
        gamma = log_c = power_r2 = log_kappa = log_theta = geom_r2 = float("nan")
    return DecayReport(i_values=i_vals, msd=msd, se=se,
                       fitted_gamma=gamma, fitted_c_prime=math.exp(log_c),
                       power_r2=power_r2, geom_kappa=math.exp(log_kappa),
                       geom_theta=math.exp(log_theta), geom_r2=geom_r2)


def prefix_redraw_payoff(model: ChainModel, path: ChainPath, i: int,
                         stream: UniformStream) -> float:
    """Redraw the final i innovations of a cached trajectory and re-pay.

    Keeps states up to time d-i, applies i fresh steps: i draws, i steps, one
    payoff evaluation.  With i = 0 the cached payoff is returned at zero cost;
    with i = d this is a full independent resimulation.
    """
    d = model.horizon
    if not 0 <= i <= d:
        raise ValueError(f"redraw depth i={i} outside [0, {d}]")
    if i == 0:
        return path.payoff
    ledger = stream.ledger
    ys = stream.draw(i)
    x = np.float64(path.states[d - i])
    for k in range(i):
        x = model.step(d - i + k, x, ys[k])
    ledger.step_applications += i
    ledger.payoff_evals += 1
    return float(model.payoff(x))


def uniform_increments(a: float = LINDLEY_A, b: float = LINDLEY_B):
    """Increment family with uniform(a, b) increments at every time index."""
    if not b > a:
        raise ValueError("need b > a")

    def zeta(i: int, y):
        return a + (b - a) * y

    return zeta


def modulated_uniform_increments(d: int, a: float = LINDLEY_A, b: float = LINDLEY_B,
                                 amplitude: float = 0.1):
    """Genuinely time-varying increments: the support widens and narrows
    sinusoidally around a fixed center, so the mean drift is constant while
    the per-step drift integral stays below 1 for every time index."""
    if not b > a:
        raise ValueError("need b > a")

    def zeta(i: int, y):
        s = amplitude * math.sin(2.0 * math.pi * i / d)
        return (a - s) + ((b + s) - (a - s)) * y

    return zeta


def make_lindley(d: int, zeta=None) -> ChainModel:
    """Waiting-time recursion x <- max(x + increment, 0) from an empty queue.

    ``zeta(i, y)`` maps a uniform variate to the time-i increment; the default
    is uniform(-0.6, 0.4), which has drift -0.1 and drift integral 0.943 at
    unit tilt.  The payoff is the terminal state itself.
    """
    if zeta is None:
        zeta = uniform_increments()

    def step(t, x, y):
        return np.maximum(x + zeta(t, y), 0.0)

    def payoff(x):
        return x

    return ChainModel(horizon=d, initial_state=0.0, step=step, payoff=payoff)


def drift_integral(zeta_at_y, theta: float, resolution: int = 256) -> float:
    """Gauss-Legendre value of the exponential drift integral of one increment
    function: the integral over y in [0,1] of exp(theta * zeta(y)).

    Values below 1 certify geometric forgetting of the initial state for the
    waiting-time recursion.
    """
    if theta <= 0.0:
        raise ValueError("tilt theta must be positive")
    if resolution < 1:
        raise ValueError("resolution must be at least 1")
    nodes, weights = np.polynomial.legendre.leggauss(resolution)
    y = 0.5 * (nodes + 1.0)
    values = np.exp(theta * np.asarray(zeta_at_y(y), dtype=float))
    if not np.all(np.isfinite(values)):
        raise ValueError("drift integrand is not finite on [0, 1]")
    return float(0.5 * weights @ values)


def chain_integrand(model: ChainModel) -> Integrand:
    """Expose the chain payoff as an integrand on the unit cube.

    Coordinate k (1-based) of a point is the innovation k steps before the
    horizon, so restart depth corresponds to prefix length.  Each evaluation
    charges the d chain steps it performs.
    """
    d = model.horizon

    def evaluator(points: np.ndarray) -> np.ndarray:
        ys = points[:, ::-1]
        states = np.full(points.shape[0], float(model.initial_state))
        for t in range(d):
            states = model.step(t, states, ys[:, t])
        return np.asarray(model.payoff(states), dtype=float)

    return Integrand(dimension=d, evaluator=evaluator, steps_per_eval=d)

"""Residual-variance profiles, truncation dimension, and variance-inequality checks.

For a square-integrable f on the unit cube, ``D(i)`` is the variance carried
by interaction terms that involve any coordinate beyond the first ``i``.  It
decreases from ``D(0) = var(f(U))`` to ``D(d) = 0``, and the truncation
dimension is ``d_t = sum_i D(i) / var(f(U))``.

Two routes produce a profile:

* :func:`analytic_profile` uses the closed-form component variances of the
  additive/product families.
* :func:`mc_profile` is a sampling oracle for black-box integrands.  It uses
  the identity ``D(i) = var(f(U)) - cov(f(V), f(V'))`` where V and V' are
  uniform on the cube and share exactly their first i coordinates: the
  covariance of such a pair equals the variance explained by the first i
  coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrands import Integrand
from .streams import CostLedger, UniformStream


class UnsupportedIntegrandError(ValueError):
    """Raised when an operation needs analytic family data the integrand lacks."""


class DegenerateIntegrandError(ValueError):
    """Raised when an estimated variance is not positive."""


@dataclass(frozen=True)
class VarianceProfile:
    """Residual variances D(0..d), total variance, and truncation dimension.

    For a sampled profile, ``D`` is the isotonic (nonincreasing) adjustment of
    the raw estimates kept in ``raw_D``; ``se`` holds per-index standard
    errors of the raw estimates.  Endpoints are pinned: ``D[0] = var_f`` and
    ``D[d] = 0``.
    """

    D: np.ndarray
    var_f: float
    d_t: float
    source: str  # "analytic" | "mc"
    n_pairs: int | None = None
    se: np.ndarray | None = None
    raw_D: np.ndarray | None = None

    def __post_init__(self):
        D = np.asarray(self.D, dtype=float)
        object.__setattr__(self, "D", D)
        if self.var_f <= 0.0:
            raise DegenerateIntegrandError("profile requires positive variance")
        tol = 1e-9 * max(self.var_f, 1.0)
        if np.any(np.diff(D) > tol):
            raise ValueError("residual variances must be nonincreasing")
        if abs(D[0] - self.var_f) > tol or abs(D[-1]) > tol:
            raise ValueError("profile endpoints must be D[0]=var_f and D[d]=0")

    @property
    def dimension(self) -> int:
        return self.D.size - 1


@dataclass(frozen=True)
class InequalityReport:
    """Outcome of a sampled inequality check: pass iff lhs <= rhs within slack."""

    lhs: float
    rhs: float
    se: float
    slack: float
    passed: bool


def truncation_dimension(profile: VarianceProfile) -> float:
    """sum_i D(i) / var_f; lies in [1, d] for any valid profile."""
    if profile.var_f <= 0.0:
        raise DegenerateIntegrandError("truncation dimension requires positive variance")
    return float(profile.D.sum() / profile.var_f)


def isotonic_nonincreasing(y: np.ndarray) -> np.ndarray:
    """L2 projection onto nonincreasing sequences (pool adjacent violators)."""
    blocks: list[list[float]] = []  # [sum, count]
    for v in np.asarray(y, dtype=float):
        s, c = float(v), 1.0
        while blocks and blocks[-1][0] * c < s * blocks[-1][1]:
            ps, pc = blocks.pop()
            s += ps
            c += pc
        blocks.append([s, c])
    return np.concatenate([np.full(int(c), s / c) for s, c in blocks])


def _component_variances(integrand: Integrand) -> np.ndarray:
    if integrand.family not in ("additive", "product") or integrand.coefficients is None:
        raise UnsupportedIntegrandError(
            "analytic profile requires an additive or product family integrand")
    return np.asarray(integrand.coefficients, dtype=float) ** 2 / 12.0


def analytic_profile(integrand: Integrand) -> VarianceProfile:
    """Exact profile from the family's closed-form component variances.

    ``d_t`` is derived independently of ``D`` (from the variance-weighted
    highest-coordinate index of each component), so the identity
    ``sum_i D(i) = d_t * var_f`` is a genuine cross-check of two derivations.
    """
    a = _component_variances(integrand)
    d = integrand.dimension
    idx = np.arange(1, d + 1, dtype=float)
    if integrand.family == "additive":
        # subsets are singletons {j}: D(i) sums the a_j with j > i.
        # var_f is read off D[0] so the endpoint identity is bit-exact.
        D = np.concatenate([np.cumsum(a[::-1])[::-1], [0.0]])
        var_f = float(D[0])
        dt_var = float(np.dot(idx, a))
    else:
        # subsets Y with max(Y) <= i contribute prod_{j in Y} a_j: prefix products
        prefix = np.concatenate([[1.0], np.cumprod(1.0 + a)])
        D = prefix[-1] - prefix
        var_f = float(prefix[-1] - 1.0)
        # grouping subsets by their largest element j gives weight a_j * prefix[j-1]
        dt_var = float(np.dot(idx, a * prefix[:-1]))
    return VarianceProfile(D=D, var_f=var_f, d_t=dt_var / var_f, source="analytic")


def _shared_prefix_pair(integrand: Integrand, i: int, n: int, stream: UniformStream,
                        ledger: CostLedger | None) -> tuple[np.ndarray, np.ndarray]:
    """n value pairs (f(V), f(V')) with V, V' sharing exactly the first i coordinates."""
    d = integrand.dimension
    common = stream.draw_matrix(n, i)
    tail_x = stream.draw_matrix(n, d - i)
    tail_y = stream.draw_matrix(n, d - i)
    x = integrand.eval_batch(np.hstack([common, tail_x]), ledger)
    y = integrand.eval_batch(np.hstack([common, tail_y]), ledger)
    return x, y


def _cov_and_se(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    n = x.size
    w = (x - x.mean()) * (y - y.mean())
    cov = float(w.sum() / (n - 1))
    se = float(w.std(ddof=1) / np.sqrt(n))
    return cov, se


def _var_and_se(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    centered = values - values.mean()
    var = float(np.dot(centered, centered) / (n - 1))
    mu4 = float(np.mean(centered ** 4))
    se = float(np.sqrt(max(mu4 - var ** 2, 0.0) / n))
    return var, se


def mc_profile(integrand: Integrand, n_pairs: int, stream: UniformStream) -> VarianceProfile:
    """Sampling oracle for the residual-variance profile of a black-box integrand.

    For each i the covariance of shared-prefix pairs is subtracted from a
    variance estimate pooled over all evaluations.  Raw estimates are then
    projected onto nonincreasing sequences and the endpoints pinned
    (D[0] = pooled variance, D[d] = 0).  Reported standard errors treat the
    variance and covariance estimates as independent, which is conservative.
    """
    if n_pairs < 2:
        raise ValueError("n_pairs must be at least 2")
    d = integrand.dimension
    ledger = stream.ledger
    cov = np.zeros(d + 1)
    cov_se = np.zeros(d + 1)
    pooled: list[np.ndarray] = []
    for i in range(d + 1):
        x, y = _shared_prefix_pair(integrand, i, n_pairs, stream.fork(i), ledger)
        cov[i], cov_se[i] = _cov_and_se(x, y)
        pooled.append(x)
        pooled.append(y)
    var_hat, var_se = _var_and_se(np.concatenate(pooled))
    if var_hat <= 0.0:
        raise DegenerateIntegrandError("pooled variance estimate is not positive")

    raw = var_hat - cov
    raw[0] = var_hat
    raw[d] = 0.0
    se = np.sqrt(var_se ** 2 + cov_se ** 2)
    se[0] = var_se
    se[d] = 0.0

    D = np.clip(isotonic_nonincreasing(raw), 0.0, var_hat)
    D[0] = var_hat
    D[d] = 0.0
    return VarianceProfile(D=D, var_f=var_hat, d_t=float(D.sum() / var_hat),
                           source="mc", n_pairs=n_pairs, se=se, raw_D=raw)


def check_pair_variance_bound(integrand: Integrand, i: int, profile: VarianceProfile,
                              n: int, stream: UniformStream,
                              slack: float = 0.0) -> InequalityReport:
    """Check var(f(V) - f(V')) <= 4 D(i) on n shared-prefix pairs.

    The bound holds because the difference only involves interaction terms
    reaching past coordinate i, each appearing twice.
    """
    if not 0 <= i <= integrand.dimension:
        raise ValueError(f"index i={i} outside [0, {integrand.dimension}]")
    x, y = _shared_prefix_pair(integrand, i, n, stream, stream.ledger)
    lhs, se = _var_and_se(x - y)
    rhs = 4.0 * float(profile.D[i])
    passed = lhs <= rhs * (1.0 + slack) + 4.0 * se
    return InequalityReport(lhs=lhs, rhs=rhs, se=se, slack=slack, passed=passed)


def check_residual_lower_bound(integrand: Integrand, g, i: int, n: int,
                               stream: UniformStream,
                               slack: float = 0.0) -> InequalityReport:
    """Check D(i) <= var(f(U) - g(U_1..U_i)) for a batched g on the first i coordinates.

    No function of the first i coordinates can explain more variance than the
    conditional expectation, whose residual variance is exactly D(i).
    """
    if not 0 <= i <= integrand.dimension:
        raise ValueError(f"index i={i} outside [0, {integrand.dimension}]")
    ledger = stream.ledger
    if integrand.family is not None:
        lhs = float(analytic_profile(integrand).D[i])
        lhs_se = 0.0
    else:
        x, y = _shared_prefix_pair(integrand, i, n, stream.fork(0), ledger)
        var_hat, var_se = _var_and_se(np.concatenate([x, y]))
        cov, cov_se = _cov_and_se(x, y)
        lhs = var_hat - cov
        lhs_se = float(np.hypot(var_se, cov_se))
    points = stream.fork(1).draw_matrix(n, integrand.dimension)
    residual = integrand.eval_batch(points, ledger) - np.asarray(
        g(points[:, :i]), dtype=float)
    rhs, rhs_se = _var_and_se(residual)
    se = float(np.hypot(lhs_se, rhs_se))
    passed = lhs <= rhs * (1.0 + slack) + 4.0 * se
    return InequalityReport(lhs=lhs, rhs=rhs, se=se, slack=slack, passed=passed)

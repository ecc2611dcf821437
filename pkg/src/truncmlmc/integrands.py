"""Integrands on the unit cube, hybrid (prefix-spliced) evaluation, and test families.

The two built-in families have closed-form means and component variances, so
estimator output can be checked against exact values:

* additive:  f(u) = sum_i c_i (u_i - 1/2),            mean 0
* product:   f(u) = prod_i (1 + c_i (u_i - 1/2)),     mean 1

Evaluators are batched: they map an (n, d) array of points to n values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .streams import CostLedger


@dataclass(frozen=True)
class Integrand:
    """A square-integrable function on the d-dimensional unit cube.

    ``evaluator`` is deterministic and batched.  ``known_mean`` and
    ``coefficients`` are present for the built-in families and feed the
    analytic oracles.  ``steps_per_eval`` charges extra step units per point
    for integrands backed by a chain simulation.
    """

    dimension: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    known_mean: float | None = None
    family: str | None = None  # "additive" | "product" | None
    coefficients: np.ndarray | None = None
    steps_per_eval: int = 0

    def eval(self, u, ledger: CostLedger | None = None) -> float:
        """f(u) for a single point; counts one payoff evaluation."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dimension,):
            raise ValueError(
                f"expected a point of length {self.dimension}, got shape {u.shape}")
        return float(self.eval_batch(u[None, :], ledger)[0])

    def eval_batch(self, points: np.ndarray, ledger: CostLedger | None = None) -> np.ndarray:
        """f over the rows of an (n, d) array; counts n payoff evaluations."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.dimension:
            raise ValueError(
                f"expected points of shape (n, {self.dimension}), got {points.shape}")
        if ledger is not None:
            ledger.payoff_evals += points.shape[0]
            if self.steps_per_eval:
                ledger.step_applications += self.steps_per_eval * points.shape[0]
        return np.asarray(self.evaluator(points), dtype=float).reshape(points.shape[0])


@dataclass(frozen=True)
class HybridPoint:
    """Point whose first ``m`` coordinates come from ``u`` and the rest from ``u_prime``."""

    u: np.ndarray
    u_prime: np.ndarray
    m: int

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        u_prime = np.asarray(self.u_prime, dtype=float)
        if u.ndim != 1 or u.shape != u_prime.shape:
            raise ValueError("u and u_prime must be vectors of equal length")
        if not 0 <= self.m <= u.size:
            raise ValueError(f"prefix length m={self.m} outside [0, {u.size}]")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "u_prime", u_prime)

    def spliced(self) -> np.ndarray:
        out = self.u_prime.copy()
        out[: self.m] = self.u[: self.m]
        return out


def eval_hybrid(integrand: Integrand, point: HybridPoint,
                ledger: CostLedger | None = None) -> float:
    """Evaluate the integrand at the spliced point (one payoff evaluation).

    With ``m == d`` this is exactly ``integrand.eval(point.u)``.  The level-0
    term of the multilevel estimators is identically zero by convention and is
    handled by the level schedule, not by a special prefix length here.
    """
    return integrand.eval(point.spliced(), ledger)


def geometric_coefficients(d: int, decay: float = 0.5) -> np.ndarray:
    """c_i = decay**(i-1): later coordinates matter geometrically less."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return decay ** np.arange(d, dtype=float)


def _validated_coefficients(c, product: bool) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, dtype=float)).copy()
    if c.ndim != 1 or c.size < 1:
        raise ValueError("coefficients must be a nonempty vector")
    if not np.any(c != 0.0):
        raise ValueError("all-zero coefficients give a zero-variance integrand")
    if product and np.any((c <= -1.0) | (c > 1.0)):
        raise ValueError("product-family coefficients must lie in (-1, 1]")
    c.setflags(write=False)
    return c


def make_additive(c) -> Integrand:
    """Additive family f(u) = sum_i c_i (u_i - 1/2); mean 0, variance sum c_i^2/12."""
    c = _validated_coefficients(c, product=False)

    def evaluator(points: np.ndarray) -> np.ndarray:
        return (points - 0.5) @ c

    return Integrand(dimension=c.size, evaluator=evaluator, known_mean=0.0,
                     family="additive", coefficients=c)


def make_product(c) -> Integrand:
    """Product family f(u) = prod_i (1 + c_i (u_i - 1/2)); mean 1, with
    interaction variance prod_{i in Y} c_i^2/12 for every coordinate subset Y."""
    c = _validated_coefficients(c, product=True)

    def evaluator(points: np.ndarray) -> np.ndarray:
        return np.prod(1.0 + (points - 0.5) * c, axis=1)

    return Integrand(dimension=c.size, evaluator=evaluator, known_mean=1.0,
                     family="product", coefficients=c)


def scalar_integrand(f: Callable[[np.ndarray], float], d: int,
                     known_mean: float | None = None) -> Integrand:
    """Wrap a black-box single-point function as a (slow) batched integrand."""

    def evaluator(points: np.ndarray) -> np.ndarray:
        return np.array([f(row) for row in points], dtype=float)

    return Integrand(dimension=d, evaluator=evaluator, known_mean=known_mean)

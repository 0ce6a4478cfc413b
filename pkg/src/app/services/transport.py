"""Exact optimal transport between discrete measures.

W_ℓ uses the cost |x − y|^ℓ with outer root 1/(ℓ ∨ 1); W_0 uses 1 ∧ |x − y|.
Plans come from POT's network simplex (`ot.emd`), or from the monotone
quantile coupling (`ot.emd_1d`) for d = 1 and convex costs (ℓ ≥ 1).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import ot

from app.core.errors import ConvergenceFailure, DimensionMismatch, ExactSolverLimit, InputError
from app.services.measures import DiscreteMeasure, ProductMeasure2d, weights_on

logger = logging.getLogger(__name__)

MAX_SUPPORT = 2048
PLAN_TOL = 1e-10
EMD_MAX_ITER = 10_000_000


@dataclass(frozen=True, eq=False)
class TransportPlan:
    mass: np.ndarray
    cost: float

    @property
    def rows(self) -> int:
        return int(self.mass.shape[0])

    @property
    def cols(self) -> int:
        return int(self.mass.shape[1])

    def entries(self) -> list[tuple[int, int, float]]:
        """Nonzero (row, col, mass) triples in row-major order."""
        rows, cols = np.nonzero(self.mass)
        return [(int(i), int(j), float(self.mass[i, j])) for i, j in zip(rows, cols)]


def _check_pair(m1: DiscreteMeasure, m2: DiscreteMeasure) -> None:
    if m1.dim != m2.dim:
        raise DimensionMismatch(f"dimension mismatch: {m1.dim} vs {m2.dim}")
    if m1.size + m2.size > MAX_SUPPORT:
        raise ExactSolverLimit(
            f"combined support {m1.size + m2.size} exceeds the exact solver bound {MAX_SUPPORT}"
        )


def _diagonal_plan(m: DiscreteMeasure) -> TransportPlan:
    return TransportPlan(np.diag(m.weights), 0.0)


def _check_plan(plan: np.ndarray, a: np.ndarray, b: np.ndarray) -> None:
    row_gap = np.max(np.abs(plan.sum(axis=1) - a))
    col_gap = np.max(np.abs(plan.sum(axis=0) - b))
    if max(row_gap, col_gap) > PLAN_TOL:
        raise ConvergenceFailure(
            f"transport plan violates its marginals by {max(row_gap, col_gap):.3e}"
        )


def _solve(m1: DiscreteMeasure, m2: DiscreteMeasure, cost: np.ndarray) -> np.ndarray:
    logger.debug("network simplex on a %dx%d cost matrix", m1.size, m2.size)
    plan = ot.emd(m1.weights, m2.weights, cost, numItermax=EMD_MAX_ITER)
    _check_plan(plan, m1.weights, m2.weights)
    return plan


def cost_matrix(m1: DiscreteMeasure, m2: DiscreteMeasure, ell: float) -> np.ndarray:
    return ot.dist(m1.points, m2.points, metric="euclidean") ** ell


def wasserstein(
    m1: DiscreteMeasure, m2: DiscreteMeasure, ell: float
) -> tuple[float, TransportPlan]:
    """W_ℓ(m1, m2) for ℓ > 0 with an optimal plan."""
    if ell <= 0:
        raise InputError("wasserstein needs ell > 0; use wasserstein0 for ell = 0")
    _check_pair(m1, m2)
    if m1 == m2:
        return 0.0, _diagonal_plan(m1)
    cost = cost_matrix(m1, m2, ell)
    if m1.dim == 1 and ell >= 1:
        plan = ot.emd_1d(
            m1.points[:, 0], m2.points[:, 0], m1.weights, m2.weights, metric="euclidean", dense=True
        )
        plan = np.asarray(plan, dtype=float)
        _check_plan(plan, m1.weights, m2.weights)
    else:
        plan = _solve(m1, m2, cost)
    total = math.fsum((plan * cost).ravel())
    return total ** (1.0 / max(ell, 1.0)), TransportPlan(plan, total)


def wasserstein_power(m1: DiscreteMeasure, m2: DiscreteMeasure, ell: float) -> float:
    """W_ℓ^{ℓ∨1}, the optimal cost itself."""
    return wasserstein(m1, m2, ell)[1].cost


def wasserstein0(m1: DiscreteMeasure, m2: DiscreteMeasure) -> float:
    """W_0 with cost 1 ∧ |x − y| and no outer root."""
    return wasserstein0_plan(m1, m2).cost


def wasserstein0_plan(m1: DiscreteMeasure, m2: DiscreteMeasure) -> TransportPlan:
    _check_pair(m1, m2)
    if m1 == m2:
        return _diagonal_plan(m1)
    cost = np.minimum(1.0, ot.dist(m1.points, m2.points, metric="euclidean"))
    plan = _solve(m1, m2, cost)
    return TransportPlan(plan, math.fsum((plan * cost).ravel()))


def product_wasserstein(p1: ProductMeasure2d, p2: ProductMeasure2d, ell: float) -> float:
    """W_ℓ on R^{2d}, each pair read as one 2d-dimensional point."""
    if p1.dim != p2.dim:
        raise DimensionMismatch(f"dimension mismatch: {p1.dim} vs {p2.dim}")
    return wasserstein(p1.joint, p2.joint, ell)[0]


def d_v_beta_weights(p: np.ndarray, q: np.ndarray, v: np.ndarray, beta: float) -> float:
    """d_{V,β} for two weight vectors laid out over the same states."""
    if beta <= 0:
        raise InputError("beta must be positive")
    return math.fsum(np.abs(np.asarray(p) - np.asarray(q)) * (1.0 + beta * np.asarray(v)))


def d_v_beta(
    theta: DiscreteMeasure,
    sigma: DiscreteMeasure,
    states: np.ndarray,
    v: np.ndarray,
    beta: float,
) -> float:
    """sup_{‖φ‖_{V,β} ≤ 1} |θ(φ) − σ(φ)| = Σ_x |θ(x) − σ(x)| (1 + βV(x)) on finite states.

    `states` must be the canonical state list V is indexed by.
    """
    return d_v_beta_weights(weights_on(theta, states), weights_on(sigma, states), v, beta)

"""Finite-state Markov kernels: invariant measures, Lyapunov certificates,
Poisson equations and the asymptotic variance of the Markov CLT.

States are kept in canonical (lexicographic) order, so every sup/inf in the
drift and minorization conditions is an exact finite max over states or pairs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as la

from app.core.errors import (
    ConvergenceFailure,
    InputError,
    InvalidBeta,
    InvalidMeasure,
    LyapunovViolation,
    NotErgodic,
)
from app.services.functionals import Functional
from app.services.measures import DiscreteMeasure, as_points, consolidate, weights_on

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12
INVARIANCE_TOL = 1e-10
CHECK_TOL = 1e-12
MAX_NEUMANN_TERMS = 10**6


class LyapunovVariant(str, Enum):
    L2 = "L2"
    L2_PRIME = "L2prime"


@dataclass(frozen=True, eq=False)
class MarkovModel:
    """Kernel P over canonical states with its invariant weights `pi`."""

    states: np.ndarray
    kernel: np.ndarray
    pi: np.ndarray

    def __post_init__(self) -> None:
        k = self.states.shape[0]
        if self.kernel.shape != (k, k) or self.pi.shape != (k,):
            raise InvalidMeasure("kernel must be k×k over k states")
        _check_stochastic(self.kernel)
        if np.unique(self.states, axis=0).shape[0] != k or not np.array_equal(
            np.unique(self.states, axis=0), self.states
        ):
            raise InvalidMeasure("states must be distinct and in canonical order")
        if np.max(np.abs(self.pi @ self.kernel - self.pi)) > INVARIANCE_TOL:
            raise NotErgodic("pi is not invariant under the kernel")
        for a in (self.states, self.kernel, self.pi):
            a.setflags(write=False)

    @classmethod
    def from_kernel(cls, states: object, kernel: object) -> MarkovModel:
        """Sort states canonically (permuting P along) and solve for the invariant law."""
        pts = as_points(states)
        p = np.asarray(kernel, dtype=float)
        if p.shape != (pts.shape[0], pts.shape[0]):
            raise InvalidMeasure(f"kernel shape {p.shape} does not match {pts.shape[0]} states")
        order = np.lexsort(pts.T[::-1])
        pts, p = pts[order], p[np.ix_(order, order)]
        _check_stochastic(p)
        return cls(np.ascontiguousarray(pts), np.ascontiguousarray(p), stationary_weights(p))

    @property
    def size(self) -> int:
        return int(self.states.shape[0])

    @property
    def dim(self) -> int:
        return int(self.states.shape[1])

    @property
    def mu(self) -> DiscreteMeasure:
        return consolidate(self.states, self.pi)

    def expect(self, values: np.ndarray) -> float:
        return math.fsum(self.pi * values)


@dataclass(frozen=True, eq=False)
class LyapunovCertificate:
    v: np.ndarray
    gamma: float
    K: float
    R: float
    rho: float
    variant: LyapunovVariant
    ell: float
    c_ell: float

    @property
    def beta_max(self) -> float:
        """Upper end of the admissible β interval (0, ρ/K)."""
        return math.inf if self.K == 0 else self.rho / self.K


@dataclass(frozen=True, eq=False)
class PoissonSolution:
    f: np.ndarray
    F: np.ndarray
    PF: np.ndarray
    residual: float
    variance: float
    method: str
    terms: int = 0
    term_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rate_bound: float | None = None


def _check_stochastic(p: np.ndarray) -> None:
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise InvalidMeasure("transition matrix must be square")
    if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        raise InvalidMeasure("transition probabilities must lie in [0, 1]")
    gap = np.max(np.abs(p.sum(axis=1) - 1.0))
    if gap > ROW_SUM_TOL:
        raise InvalidMeasure(f"rows must sum to 1 (off by {gap:.3e})")


def stationary_weights(p: np.ndarray) -> np.ndarray:
    """μ with μP = μ, Σμ = 1, from the balance equations with one replaced by normalization."""
    _check_stochastic(p)
    k = p.shape[0]
    eigenvalues = la.eigvals(p)
    ones = int(np.sum(np.abs(eigenvalues - 1.0) < 1e-8))
    if ones > 1:
        raise NotErgodic(f"eigenvalue 1 has multiplicity {ones}; invariant measure not unique")
    if k > 1 and np.any((np.abs(eigenvalues) > 1.0 - 1e-10) & (np.abs(eigenvalues - 1.0) >= 1e-8)):
        raise NotErgodic("kernel is periodic (unit-modulus eigenvalue other than 1)")
    system = p.T - np.eye(k)
    system[-1, :] = 1.0
    rhs = np.zeros(k)
    rhs[-1] = 1.0
    try:
        pi = la.solve(system, rhs)
    except la.LinAlgError as exc:
        raise NotErgodic("balance equations are singular") from exc
    pi = np.where(np.abs(pi) < 1e-15, 0.0, pi)
    if np.any(pi < 0):
        raise NotErgodic("invariant solution has negative mass")
    return pi / math.fsum(pi)


def invariant_measure(p: object, states: object | None = None) -> DiscreteMeasure:
    """Unique invariant law of P, placed on `states` (default: 0, 1, …, k−1)."""
    kernel = np.asarray(p, dtype=float)
    pi = stationary_weights(kernel)
    pts = np.arange(kernel.shape[0], dtype=float).reshape(-1, 1) if states is None else as_points(states)
    return consolidate(pts, pi)


def verify_lyapunov(
    model: MarkovModel,
    v: object,
    gamma: float,
    K: float,
    R: float,
    rho: float,
    variant: LyapunovVariant = LyapunovVariant.L2,
    ell: float = 2.0,
) -> LyapunovCertificate:
    """Check drift, radius, minorization, μ(V) and √V-drift exhaustively."""
    v = np.asarray(v, dtype=float)
    if v.shape != (model.size,) or np.any(v < 0):
        raise InputError("V must be a nonnegative value per state")
    if not 0 < gamma < 1 or K < 0 or R <= 0 or not 0 < rho <= 1:
        raise InputError("need gamma in (0,1), K >= 0, R > 0, rho in (0,1]")
    p = model.kernel
    violations: list[str] = []

    pv = p @ v
    for x in np.flatnonzero(pv > gamma * v + K + CHECK_TOL):
        violations.append(f"L1 fails at state {x}: PV={pv[x]:.6g} > {gamma * v[x] + K:.6g}")

    if variant is LyapunovVariant.L2:
        threshold = 2 * K / (1 - gamma)
    else:
        threshold = 4 * K / (1 - math.sqrt(gamma)) ** 2
    if not R > threshold:
        violations.append(f"{variant.value} radius fails: R={R:.6g} <= {threshold:.6g}")

    overlap = np.minimum(p[:, None, :], p[None, :, :]).sum(axis=2)
    small = (v[:, None] + v[None, :]) <= R
    for x, y in zip(*np.nonzero(small & (overlap < rho - CHECK_TOL))):
        if x <= y:
            violations.append(
                f"minorization fails at pair ({x}, {y}): overlap {overlap[x, y]:.6g} < {rho:.6g}"
            )

    mu_v = model.expect(v)
    if mu_v > K / (1 - gamma) + CHECK_TOL:
        violations.append(f"mu(V)={mu_v:.6g} exceeds K/(1-gamma)={K / (1 - gamma):.6g}")

    root = np.sqrt(v)
    p_root = p @ root
    for x in np.flatnonzero(p_root > math.sqrt(gamma) * root + math.sqrt(K) + CHECK_TOL):
        violations.append(f"sqrt-V drift fails at state {x}")

    if violations:
        raise LyapunovViolation(violations)

    radial = np.linalg.norm(model.states, axis=1) ** ell
    c_ell = float(np.max(radial / (1.0 + v)))
    logger.debug("Lyapunov certificate accepted (gamma=%s, K=%s, R=%s, rho=%s)", gamma, K, R, rho)
    return LyapunovCertificate(v.copy(), gamma, K, R, rho, variant, ell, c_ell)


def sqrt_certificate(model: MarkovModel, cert: LyapunovCertificate) -> LyapunovCertificate:
    """Certificate for the quadruple (√V, √γ, √K, √R) implied by L1 + L2'."""
    if cert.variant is not LyapunovVariant.L2_PRIME:
        raise InputError("the square-root quadruple needs an L2' certificate")
    return verify_lyapunov(
        model,
        np.sqrt(cert.v),
        math.sqrt(cert.gamma),
        math.sqrt(cert.K),
        math.sqrt(cert.R),
        cert.rho,
        LyapunovVariant.L2,
        cert.ell,
    )


def contraction_factor(cert: LyapunovCertificate, beta: float) -> float:
    """χ(ρ, β, γ, K, R) = (1 − ρ + βK) ∨ (2 + βγR + 2βK)/(2 + βR)."""
    if not 0 < beta < cert.beta_max:
        raise InvalidBeta(f"beta={beta} outside (0, {cert.beta_max})")
    chi = max(
        1 - cert.rho + beta * cert.K,
        (2 + beta * cert.gamma * cert.R + 2 * beta * cert.K) / (2 + beta * cert.R),
    )
    if not 0 < chi < 1:
        raise InvalidBeta(f"contraction factor {chi} not in (0, 1) for beta={beta}")
    return chi


def v_beta_norm(phi: np.ndarray, v: np.ndarray, beta: float) -> float:
    """‖φ‖_{V,β} = max_x |φ(x)| / (1 + βV(x))."""
    return float(np.max(np.abs(phi) / (1.0 + beta * np.asarray(v))))


def _finish(
    model: MarkovModel, f: np.ndarray, F: np.ndarray, method: str, **extra: object
) -> PoissonSolution:
    F = F - model.expect(F)
    p = model.kernel
    PF = p @ F
    centered = f - model.expect(f)
    residual = float(np.max(np.abs(F - PF - centered)))
    variance = model.expect(p @ (F * F) - PF * PF)
    return PoissonSolution(f, F, PF, residual, variance, method, **extra)


def observable_values(model: MarkovModel, f: object) -> np.ndarray:
    values = np.asarray(f, dtype=float)
    if values.shape != (model.size,):
        raise InputError(f"observable must have one value per state ({model.size})")
    return values


def solve_poisson_direct(model: MarkovModel, f: object) -> PoissonSolution:
    """Solve (I − P + 1μᵀ)F = f − μ(f); its solution is the μ-centered one."""
    f = observable_values(model, f)
    k = model.size
    system = np.eye(k) - model.kernel + np.outer(np.ones(k), model.pi)
    try:
        F = la.solve(system, f - model.expect(f))
    except la.LinAlgError as exc:
        raise NotErgodic("augmented Poisson system is singular") from exc
    return _finish(model, f, F, "direct")


def solve_poisson_neumann(
    model: MarkovModel,
    certificate: LyapunovCertificate | None,
    f: object,
    tol: float,
    max_terms: int = MAX_NEUMANN_TERMS,
) -> PoissonSolution:
    """F = Σ_n (Pⁿf − μ(f)), truncated once the geometric tail of ‖·‖_{√V,1} falls below tol."""
    if tol <= 0:
        raise InputError("tol must be positive")
    f = observable_values(model, f)
    v = certificate.v if certificate is not None else np.zeros(model.size)
    weight = 1.0 + np.sqrt(v)
    rate_bound = None
    if certificate is not None and certificate.variant is LyapunovVariant.L2_PRIME:
        root = sqrt_certificate(model, certificate)
        beta = root.beta_max / 2 if math.isfinite(root.beta_max) else 1.0
        rate_bound = contraction_factor(root, beta)

    g = f - model.expect(f)
    F = np.zeros(model.size)
    norms: list[float] = []
    for n in range(max_terms):
        norm = float(np.max(np.abs(g) / weight))
        norms.append(norm)
        F += g
        if norm == 0.0:
            break
        if n >= 1 and norms[-2] > 0:
            recent = np.array(norms[-11:])
            q = float(np.max(recent[1:] / recent[:-1]))
            if q < 1 and norm * q / (1 - q) < tol:
                break
        g = model.kernel @ g
    else:
        raise ConvergenceFailure(f"Neumann series did not reach tol={tol} within {max_terms} terms")
    logger.debug("Neumann series stopped after %d terms", len(norms))
    return _finish(
        model, f, F, "neumann", terms=len(norms), term_norms=np.array(norms), rate_bound=rate_bound
    )


def poisson_for_functional(model: MarkovModel, U: Functional) -> PoissonSolution:
    """Poisson solution for f = δU/δm(μ, ·) on the states."""
    f = U.derivative(model.mu, model.states)
    solution = solve_poisson_direct(model, f)
    F2 = solution.F * solution.F
    drift = abs(model.expect(model.kernel @ F2) - model.expect(F2))
    if drift > 1e-10 * max(1.0, model.expect(F2)):
        raise ConvergenceFailure(f"invariance identity mu(P F^2) = mu(F^2) off by {drift:.3e}")
    return solution


def asymptotic_variance_markov(model: MarkovModel, U: Functional) -> float:
    """μ(P(F²)) − μ((PF)²) for the Poisson solution of δU/δm(μ, ·)."""
    return poisson_for_functional(model, U).variance


def _inverse_cdf(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = (u[..., None] >= cdf).sum(axis=-1)
    return np.minimum(idx, cdf.shape[-1] - 1)


def sample_chain_indices(
    model: MarkovModel, nu1: DiscreteMeasure, n: int, rng: np.random.Generator
) -> np.ndarray:
    """State indices of X_1..X_N: X_1 ~ ν1, X_{i+1} ~ P(X_i, ·), both by inverse CDF.

    Step i draws one uniform u_i, which fixes a map T_i: state → next state; the
    path is the prefix composition of those maps, computed by doubling.
    """
    if n < 1:
        raise InputError("path length must be at least 1")
    start = weights_on(nu1, model.states)
    x1 = int(_inverse_cdf(np.cumsum(start), np.array([rng.random()]))[0])
    if n == 1:
        return np.array([x1])
    u = rng.random(n - 1)
    maps = _inverse_cdf(np.cumsum(model.kernel, axis=1)[None, :, :], u[:, None])
    offset = 1
    while offset < n - 1:
        composed = maps.copy()
        composed[offset:] = np.take_along_axis(maps[offset:], maps[:-offset], axis=1)
        maps = composed
        offset *= 2
    return np.concatenate([[x1], maps[:, x1]])


def sample_chain(
    model: MarkovModel, nu1: DiscreteMeasure, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Points X_1..X_N of the chain, shape (N, d)."""
    return model.states[sample_chain_indices(model, nu1, n, rng)]


def ergodic_average(model: MarkovModel, f: object, path_indices: np.ndarray) -> float:
    """(1/N) Σ f(X_i) for a path given by state indices."""
    return math.fsum(observable_values(model, f)[path_indices]) / len(path_indices)

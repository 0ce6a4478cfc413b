"""Sampling regimes for the CLT experiments and their exact marginal diagnostics.

Finite families expose one primitive, `marginal_table`, which lays the laws
of X_i for a batch of indices over a single canonical support. Everything
else (ν̄_N, the pair mixture, TX and Lindeberg sums, inverse-CDF sampling)
is computed from that table.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from app.core.errors import InputError, InvalidMeasure, Unsupported
from app.services.markov import MarkovModel, sample_chain
from app.services.measures import (
    DiscreteMeasure,
    ProductMeasure2d,
    SignedDiscreteMeasure,
    consolidate,
    consolidate_signed,
    mixture,
    pair_measure,
    support_union,
    weighted_norm_ell,
    weights_on,
)


@dataclass(frozen=True, eq=False)
class LimitData:
    """μ, η and σ of the independent CLT."""

    mu: DiscreteMeasure
    eta: ProductMeasure2d
    sigma: SignedDiscreteMeasure


def _inverse_cdf_rows(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(weights, axis=1)
    idx = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(idx, weights.shape[1] - 1)


def _pairs_from_gram(support: np.ndarray, gram: np.ndarray) -> ProductMeasure2d:
    k = support.shape[0]
    return pair_measure(np.repeat(support, k, axis=0), np.tile(support, (k, 1)), gram.reshape(-1))


class SequenceFamily(ABC):
    kind: str = ""
    independent = True

    def __init__(self, ell: float = 2.0) -> None:
        if ell < 0:
            raise InputError("moment order ell must be nonnegative")
        self.ell = ell

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @abstractmethod
    def support(self) -> np.ndarray:
        """Canonical support containing every marginal."""

    @abstractmethod
    def marginal_table(self, indices: np.ndarray) -> np.ndarray:
        """Weights of ν_i over `support()` for each index i ≥ 1; shape (len(indices), k)."""

    def marginal(self, i: int) -> DiscreteMeasure:
        if i < 1:
            raise InputError("sequence indices start at 1")
        return consolidate(self.support(), self.marginal_table(np.array([i]))[0])

    def limit_data(self) -> LimitData:
        raise Unsupported(f"{self.kind} family has no independent-regime limit data")

    def mean_marginal(self, n: int) -> DiscreteMeasure:
        """ν̄_N = (1/N) Σ_{i≤N} ν_i."""
        table = self.marginal_table(np.arange(1, n + 1))
        return consolidate(self.support(), table.mean(axis=0))

    def pair_mixture(self, n: int) -> ProductMeasure2d:
        """(1/N) Σ_{i≤N} ν_i ⊗ ν_i."""
        table = self.marginal_table(np.arange(1, n + 1))
        return _pairs_from_gram(self.support(), table.T @ table / n)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Independent draws X_i ~ ν_i by inverse CDF; shape (N, d)."""
        if n < 1:
            raise InputError("path length must be at least 1")
        table = self.marginal_table(np.arange(1, n + 1))
        return self.support()[_inverse_cdf_rows(table, rng.random(n))]


class IIDFamily(SequenceFamily):
    kind = "iid"

    def __init__(self, mu: DiscreteMeasure, ell: float = 2.0) -> None:
        super().__init__(ell)
        self.mu = mu

    @property
    def dim(self) -> int:
        return self.mu.dim

    def support(self) -> np.ndarray:
        return self.mu.points

    def marginal_table(self, indices: np.ndarray) -> np.ndarray:
        return np.tile(self.mu.weights, (len(indices), 1))

    def marginal(self, i: int) -> DiscreteMeasure:
        if i < 1:
            raise InputError("sequence indices start at 1")
        return self.mu

    def mean_marginal(self, n: int) -> DiscreteMeasure:
        return self.mu

    def pair_mixture(self, n: int) -> ProductMeasure2d:
        return _pairs_from_gram(self.mu.points, np.outer(self.mu.weights, self.mu.weights))

    def limit_data(self) -> LimitData:
        return LimitData(self.mu, self.pair_mixture(1), SignedDiscreteMeasure.zero(self.dim))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n < 1:
            raise InputError("path length must be at least 1")
        cdf = np.cumsum(self.mu.weights)
        idx = np.minimum(np.searchsorted(cdf, rng.random(n), side="right"), self.mu.size - 1)
        return self.mu.points[idx]


class CyclicFamily(SequenceFamily):
    """ν_i = θ_{(i−1) mod m}."""

    kind = "cyclic"

    def __init__(self, thetas: list[DiscreteMeasure], ell: float = 2.0) -> None:
        super().__init__(ell)
        if not thetas:
            raise InvalidMeasure("a cyclic family needs at least one measure")
        self.thetas = list(thetas)
        self._support = support_union(*self.thetas)
        self._rows = np.vstack([weights_on(t, self._support) for t in self.thetas])

    @property
    def dim(self) -> int:
        return self.thetas[0].dim

    @property
    def period(self) -> int:
        return len(self.thetas)

    def support(self) -> np.ndarray:
        return self._support

    def marginal_table(self, indices: np.ndarray) -> np.ndarray:
        return self._rows[(np.asarray(indices) - 1) % self.period]

    def marginal(self, i: int) -> DiscreteMeasure:
        if i < 1:
            raise InputError("sequence indices start at 1")
        return self.thetas[(i - 1) % self.period]

    def _class_counts(self, n: int) -> np.ndarray:
        return np.array([len(range(j + 1, n + 1, self.period)) for j in range(self.period)], dtype=float)

    def mean_marginal(self, n: int) -> DiscreteMeasure:
        # class counts: for N a multiple of m this is the very same mixture as μ
        counts = self._class_counts(n)
        if np.all(counts == counts[0]):
            return mixture(self.thetas, [1.0 / self.period] * self.period)
        return mixture(self.thetas, counts / n)

    def pair_mixture(self, n: int) -> ProductMeasure2d:
        counts = self._class_counts(n)
        gram = (self._rows.T * (counts / n)) @ self._rows
        return _pairs_from_gram(self._support, gram)

    def limit_data(self) -> LimitData:
        mu = mixture(self.thetas, [1.0 / self.period] * self.period)
        eta = _pairs_from_gram(self._support, self._rows.T @ self._rows / self.period)
        return LimitData(mu, eta, SignedDiscreteMeasure.zero(self.dim))


class DecayingFamily(SequenceFamily):
    """ν_i = μ + i^{−α} τ with ‖τ‖_ℓ ≤ c, so ‖ν_i − μ‖_ℓ ≤ c / i^α."""

    kind = "decaying"

    def __init__(
        self,
        mu: DiscreteMeasure,
        tau: SignedDiscreteMeasure,
        alpha: float,
        c: float,
        ell: float = 2.0,
    ) -> None:
        super().__init__(ell)
        if alpha <= 0.5:
            raise InputError("decay exponent alpha must exceed 1/2")
        self._setup(mu, tau, alpha)
        norm = weighted_norm_ell(tau, ell)
        if norm > c:
            raise InputError(f"perturbation norm {norm:.6g} exceeds the bound c={c}")
        self.c = c

    def _setup(self, mu: DiscreteMeasure, tau: SignedDiscreteMeasure, alpha: float) -> None:
        if mu.dim != tau.dim:
            raise InvalidMeasure("perturbation dimension differs from mu")
        if abs(tau.total_mass()) > 1e-12:
            raise InvalidMeasure("perturbation must have total mass 0")
        self.mu, self.tau, self.alpha = mu, tau, alpha
        self._support = support_union(mu, tau) if tau.size else mu.points
        self._mu_row = weights_on(mu, self._support)
        self._tau_row = weights_on(tau, self._support)
        # i = 1 is the worst case for negativity
        if np.any(self._mu_row + self._tau_row < 0):
            raise InvalidMeasure("mu + tau has negative weights")

    @property
    def dim(self) -> int:
        return self.mu.dim

    def support(self) -> np.ndarray:
        return self._support

    def marginal_table(self, indices: np.ndarray) -> np.ndarray:
        scale = np.asarray(indices, dtype=float) ** (-self.alpha)
        return np.clip(self._mu_row[None, :] + scale[:, None] * self._tau_row[None, :], 0.0, None)

    def mean_marginal(self, n: int) -> DiscreteMeasure:
        scale = math.fsum(np.arange(1, n + 1, dtype=float) ** (-self.alpha)) / n
        return consolidate(self._support, np.clip(self._mu_row + scale * self._tau_row, 0.0, None))

    def _sigma(self) -> SignedDiscreteMeasure:
        return SignedDiscreteMeasure.zero(self.dim)

    def limit_data(self) -> LimitData:
        eta = _pairs_from_gram(self.mu.points, np.outer(self.mu.weights, self.mu.weights))
        return LimitData(self.mu, eta, self._sigma())


class SqrtPerturbedFamily(DecayingFamily):
    """ν_i = μ + i^{−1/2} τ; then √N(ν̄_N − μ) → 2τ, a nonzero σ."""

    kind = "sqrt_perturbed"

    def __init__(self, mu: DiscreteMeasure, tau: SignedDiscreteMeasure, ell: float = 2.0) -> None:
        SequenceFamily.__init__(self, ell)
        self._setup(mu, tau, 0.5)
        self.c = weighted_norm_ell(tau, ell)

    def _sigma(self) -> SignedDiscreteMeasure:
        return self.tau.scale(2.0)


class MarkovFamily(SequenceFamily):
    kind = "markov"
    independent = False

    def __init__(self, model: MarkovModel, nu1: DiscreteMeasure, ell: float = 2.0) -> None:
        super().__init__(ell)
        self.model = model
        self.nu1 = nu1
        self._start = weights_on(nu1, model.states)

    @property
    def dim(self) -> int:
        return self.model.dim

    def support(self) -> np.ndarray:
        return self.model.states

    def marginal_table(self, indices: np.ndarray) -> np.ndarray:
        """ν1 P^{i−1}, propagated up to the largest requested index."""
        indices = np.asarray(indices)
        top = int(indices.max())
        rows = np.empty((top, self.model.size))
        rows[0] = self._start
        for i in range(1, top):
            rows[i] = rows[i - 1] @ self.model.kernel
        return rows[indices - 1]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return sample_chain(self.model, self.nu1, n, rng)


class AR1Family(SequenceFamily):
    """X_{n+1} = a X_n + ε_n, ε_n ~ N(0, σ_ε²), started in its stationary law."""

    kind = "ar1"
    independent = False

    def __init__(self, a: float, noise_sd: float, ell: float = 2.0) -> None:
        super().__init__(ell)
        if not abs(a) < 1:
            raise InputError("AR(1) coefficient must satisfy |a| < 1")
        if noise_sd <= 0:
            raise InputError("noise standard deviation must be positive")
        self.a = a
        self.noise_sd = noise_sd

    @property
    def dim(self) -> int:
        return 1

    @property
    def stationary_sd(self) -> float:
        return self.noise_sd / math.sqrt(1.0 - self.a**2)

    def support(self) -> np.ndarray:
        raise Unsupported("AR(1) marginals are continuous")

    def marginal_table(self, indices: np.ndarray) -> np.ndarray:
        raise Unsupported("AR(1) marginals are continuous")

    def mean_marginal(self, n: int) -> DiscreteMeasure:
        raise Unsupported("AR(1) marginals are continuous")

    def pair_mixture(self, n: int) -> ProductMeasure2d:
        raise Unsupported("AR(1) marginals are continuous")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n < 1:
            raise InputError("path length must be at least 1")
        drive = np.empty(n)
        drive[0] = rng.normal(scale=self.stationary_sd)
        drive[1:] = rng.normal(scale=self.noise_sd, size=n - 1)
        return lfilter([1.0], [1.0, -self.a], drive).reshape(-1, 1)

    def poisson_identity(self, x: np.ndarray) -> np.ndarray:
        """F(x) = (x − μ(f))/(1 − a) for f(x) = x; μ(f) = 0 here."""
        return np.asarray(x, dtype=float) / (1.0 - self.a)

    def identity_variance(self) -> float:
        """Asymptotic variance σ_ε²/(1 − a)² of √N times the ergodic mean."""
        return self.noise_sd**2 / (1.0 - self.a) ** 2


def marginal(fam: SequenceFamily, i: int) -> DiscreteMeasure:
    return fam.marginal(i)


def limit_data(fam: SequenceFamily) -> LimitData:
    return fam.limit_data()


def sample_sequence(fam: SequenceFamily, n: int, rng: np.random.Generator) -> np.ndarray:
    return fam.sample(n, rng)


def family_support(fam: SequenceFamily) -> np.ndarray:
    return fam.support()


def mean_marginal(fam: SequenceFamily, n: int) -> DiscreteMeasure:
    return fam.mean_marginal(n)


def pair_mixture(fam: SequenceFamily, n: int) -> ProductMeasure2d:
    return fam.pair_mixture(n)


def sigma_residual(fam: SequenceFamily, n: int) -> float:
    """‖√N(ν̄_N − μ) − σ‖_ℓ, computed on the family's support."""
    data = fam.limit_data()
    support = fam.support()
    gap = math.sqrt(n) * (weights_on(fam.mean_marginal(n), support) - weights_on(data.mu, support))
    residual = consolidate_signed(support, gap - weights_on(data.sigma, support), fam.dim)
    return weighted_norm_ell(residual, fam.ell)


def _radial(fam: SequenceFamily, ell: float) -> np.ndarray:
    return np.linalg.norm(fam.support(), axis=1) ** ell


def tx_condition_partial_sum(fam: SequenceFamily, ell: float, beta: float, i_max: int) -> float:
    """Σ_{i≤I_max} (1/i) E((|X_i|^ℓ − i^β) 1{|X_i|^ℓ > i^β}), exact from the marginals."""
    if not 0 < beta < 1:
        raise InputError("beta must lie in (0, 1)")
    indices = np.arange(1, i_max + 1)
    radial = _radial(fam, ell)
    table = fam.marginal_table(indices)
    threshold = indices.astype(float) ** beta
    excess = np.clip(radial[None, :] - threshold[:, None], 0.0, None)
    return math.fsum((table * excess).sum(axis=1) / indices)


def lindeberg_partial(fam: SequenceFamily, ell: float, n: int, eps: float) -> float:
    """(1/N) Σ_{i≤N} E(|X_i|^ℓ 1{|X_i|^ℓ > Nε})."""
    if eps <= 0:
        raise InputError("epsilon must be positive")
    radial = _radial(fam, ell)
    tail = np.where(radial > n * eps, radial, 0.0)
    if not np.any(tail):
        return 0.0
    table = fam.marginal_table(np.arange(1, n + 1))
    return math.fsum(table @ tail) / n

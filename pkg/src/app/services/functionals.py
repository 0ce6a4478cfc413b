"""Functionals U of probability measures and their linear functional derivatives.

Every functional evaluates on a batch of weight vectors laid out over one
support, so the harness can push all interpolating measures of a path through
a single call. Derivative conventions: a Linear entry returns its raw f; a
U-statistic is anchored so that δU/δm(m, 0) = 0; a Composite returns
g'(∫f dm) f(x).
"""

from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from app.core.errors import CostLimit, DimensionMismatch, InputError, UnknownFunctional
from app.services.measures import (
    DiscreteMeasure,
    as_points,
    difference,
    support_union,
    weights_on,
)

COST_LIMIT = 10**8
CHUNK = 1 << 18

PointFunction = Callable[[np.ndarray], np.ndarray]
Kernel = Callable[..., np.ndarray]
ScalarFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RegularityCertificate:
    """ℓ, derivative-domain radius r, Hölder exponent α and the frozen constants.

    `growth_const` bounds |δU/δm(m, x)| by C(1 + |x|^{ℓ/2}); `holder_const`
    and `split_const` are calibrated once for measures supported in [−2, 2]
    and then frozen. They are empirical, not sharp.
    """

    ell: float
    radius: float = math.inf
    alpha: float = 1.0
    growth_const: float = 1.0
    holder_const: float = 1.0
    split_const: float = 1.0

    def __post_init__(self) -> None:
        if not 0.5 < self.alpha <= 1.0:
            raise InputError("Hölder exponent alpha must lie in (1/2, 1]")
        if self.radius <= 0:
            raise InputError("derivative-domain radius must be positive")
        if self.ell < 0:
            raise InputError("moment order ell must be nonnegative")
        if self.growth_const <= 0:
            raise InputError("growth constant must be positive")


class Functional(ABC):
    """U : P_ℓ(R^d) → R with its linear functional derivative."""

    is_linear = False

    def __init__(
        self, functional_id: str, certificate: RegularityCertificate, dim: int | None = None
    ) -> None:
        self.id = functional_id
        self.certificate = certificate
        self.dim = dim

    @abstractmethod
    def evaluate_batch(self, support: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """U for each row of `weights` (B, k) over `support` (k, d); returns (B,)."""

    @abstractmethod
    def derivative_batch(
        self, support: np.ndarray, weights: np.ndarray, x: np.ndarray
    ) -> np.ndarray:
        """δU/δm(m_b, x_t) for each measure row b and point t; returns (B, T)."""

    def _check_dim(self, dim: int) -> None:
        if self.dim is not None and dim != self.dim:
            raise DimensionMismatch(f"{self.id} expects dimension {self.dim}, got {dim}")

    def evaluate(self, m: DiscreteMeasure) -> float:
        self._check_dim(m.dim)
        return float(self.evaluate_batch(m.points, m.weights[None, :])[0])

    def derivative(self, m: DiscreteMeasure, x: object) -> np.ndarray:
        """δU/δm(m, ·) at the points x, shape (T, d) → (T,)."""
        self._check_dim(m.dim)
        pts = as_points(x, m.dim)
        return self.derivative_batch(m.points, m.weights[None, :], pts)[0]

    def derivative_at(self, m: DiscreteMeasure, point: object) -> float:
        pts = np.atleast_1d(np.asarray(point, dtype=float)).reshape(1, -1)
        return float(self.derivative(m, pts)[0])

    def derivative_on_support(self, support: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Derivative of every measure row, evaluated at every support point: (B, k)."""
        return self.derivative_batch(support, weights, support)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.id!r})"


class LinearFunctional(Functional):
    """U(m) = ∫ f dm; δU/δm(m, x) = f(x) for every m."""

    is_linear = True

    def __init__(
        self,
        functional_id: str,
        f: PointFunction,
        certificate: RegularityCertificate,
        dim: int | None = None,
    ) -> None:
        super().__init__(functional_id, certificate, dim)
        self.f = f

    def evaluate_batch(self, support: np.ndarray, weights: np.ndarray) -> np.ndarray:
        return np.atleast_2d(weights) @ self.f(support)

    def derivative_batch(
        self, support: np.ndarray, weights: np.ndarray, x: np.ndarray
    ) -> np.ndarray:
        values = self.f(x)
        return np.broadcast_to(values, (np.atleast_2d(weights).shape[0], values.shape[0])).copy()


class UStatistic(Functional):
    """U(m) = ∫ φ dm^{⊗n} for a symmetric kernel φ taking n arrays of shape (T, d)."""

    def __init__(
        self,
        functional_id: str,
        order: int,
        phi: Kernel,
        certificate: RegularityCertificate,
        dim: int | None = None,
    ) -> None:
        if order < 2:
            raise InputError("U-statistic order must be at least 2")
        super().__init__(functional_id, certificate, dim)
        self.order = order
        self.phi = phi
        _check_symmetric(phi, order, dim or 1)

    def _tuples(self, support: np.ndarray, n: int, first: np.ndarray | None = None) -> np.ndarray:
        """φ over all n-tuples of support atoms (optionally with the first slot fixed)."""
        k = support.shape[0]
        lead = 1 if first is None else first.shape[0]
        total = lead * k**n
        if total > COST_LIMIT:
            raise CostLimit(f"{self.id}: {total} kernel evaluations exceed {COST_LIMIT}")
        shape = (k,) * n if first is None else (first.shape[0],) + (k,) * n
        flat = np.empty(total)
        for start in range(0, total, CHUNK):
            stop = min(total, start + CHUNK)
            idx = np.unravel_index(np.arange(start, stop), shape)
            if first is None:
                args = [support[i] for i in idx]
            else:
                args = [first[idx[0]]] + [support[i] for i in idx[1:]]
            flat[start:stop] = self.phi(*args)
        return flat.reshape(shape)

    def evaluate_batch(self, support: np.ndarray, weights: np.ndarray) -> np.ndarray:
        w = np.atleast_2d(weights)
        kernel = self._tuples(support, self.order)
        acc = np.tensordot(w, kernel, axes=([1], [0]))
        for _ in range(self.order - 1):
            acc = np.einsum("bi...,bi->b...", acc, w)
        return acc

    def derivative_batch(
        self, support: np.ndarray, weights: np.ndarray, x: np.ndarray
    ) -> np.ndarray:
        w = np.atleast_2d(weights)
        anchor = np.zeros((1, support.shape[1]))
        at_x = self._tuples(support, self.order - 1, first=x)
        at_zero = self._tuples(support, self.order - 1, first=anchor)
        kernel = at_x - at_zero
        acc = np.tensordot(w, kernel, axes=([1], [1]))
        for _ in range(self.order - 2):
            acc = np.einsum("bti...,bi->bt...", acc, w)
        return self.order * acc


class CompositeFunctional(Functional):
    """U(m) = g(∫ f dm); δU/δm(m, x) = g'(∫ f dm) f(x)."""

    def __init__(
        self,
        functional_id: str,
        g: ScalarFunction,
        g_prime: ScalarFunction,
        f: PointFunction,
        certificate: RegularityCertificate,
        dim: int | None = None,
    ) -> None:
        super().__init__(functional_id, certificate, dim)
        _check_derivative(g, g_prime, functional_id)
        self.g = g
        self.g_prime = g_prime
        self.f = f

    def evaluate_batch(self, support: np.ndarray, weights: np.ndarray) -> np.ndarray:
        return self.g(np.atleast_2d(weights) @ self.f(support))

    def derivative_batch(
        self, support: np.ndarray, weights: np.ndarray, x: np.ndarray
    ) -> np.ndarray:
        inner = np.atleast_2d(weights) @ self.f(support)
        return np.outer(self.g_prime(inner), self.f(x))


def _check_symmetric(phi: Kernel, order: int, dim: int) -> None:
    rng = np.random.default_rng(20240607)
    args = [rng.normal(size=(16, dim)) for _ in range(order)]
    base = phi(*args)
    for perm in itertools.permutations(range(order)):
        other = phi(*(args[p] for p in perm))
        if not np.allclose(base, other, rtol=1e-12, atol=1e-12):
            raise InputError("U-statistic kernel is not symmetric")


def _check_derivative(g: ScalarFunction, g_prime: ScalarFunction, functional_id: str) -> None:
    t = np.array([-1.5, -0.3, 0.0, 0.7, 2.0])
    h = 1e-6
    fd = (g(t + h) - g(t - h)) / (2 * h)
    if not np.allclose(fd, g_prime(t), rtol=1e-5, atol=1e-5):
        raise InputError(f"{functional_id}: g' disagrees with finite differences of g")


def finite_difference_identity_residual(
    U: Functional, m: DiscreteMeasure, m_prime: DiscreteMeasure, quadrature_nodes: int
) -> float:
    """|U(m') − U(m) − ∫₀¹ ∫ δU/δm(m_s, y)(m' − m)(dy) ds| with Gauss–Legendre in s."""
    if quadrature_nodes < 2:
        raise InputError("need at least 2 quadrature nodes")
    support = support_union(m, m_prime)
    w0, w1 = weights_on(m, support), weights_on(m_prime, support)
    nodes, node_weights = leggauss(quadrature_nodes)
    s = (nodes + 1.0) / 2.0
    path = (1.0 - s)[:, None] * w0 + s[:, None] * w1
    inner = U.derivative_on_support(support, path) @ (w1 - w0)
    integral = math.fsum(node_weights / 2.0 * inner)
    return abs(U.evaluate(m_prime) - U.evaluate(m) - integral)


def probe_grid(dim: int, size: int = 1000, half_width: float = 5.0) -> np.ndarray:
    """Fixed probe points: a uniform grid for d = 1, seeded Gaussian points otherwise."""
    if dim == 1:
        return np.linspace(-half_width, half_width, size).reshape(-1, 1)
    rng = np.random.default_rng(7)
    return rng.normal(scale=half_width / 2, size=(size, dim))


def growth_probe(
    U: Functional, m: DiscreteMeasure, grid: np.ndarray | None = None
) -> tuple[float, float]:
    """(sup_x |δU/δm(m, x)| / (1 + |x|^{ℓ/2}), declared growth constant)."""
    grid = probe_grid(m.dim) if grid is None else grid
    weight = 1.0 + np.linalg.norm(grid, axis=1) ** (U.certificate.ell / 2)
    return float(np.max(np.abs(U.derivative(m, grid)) / weight)), U.certificate.growth_const


def holder_modulus_probe(
    U: Functional, m1: DiscreteMeasure, m2: DiscreteMeasure, grid: np.ndarray | None = None
) -> tuple[float, float]:
    """Probe of the single-integral Hölder bound on derivative differences.

    lhs = sup_x |δU/δm(m2, x) − δU/δm(m1, x)| / (1 + |x|^{ℓ/2});
    rhs = C (∫ (1 + |y|^{ℓ/(2α)}) |m2 − m1|(dy))^α.
    """
    cert = U.certificate
    grid = probe_grid(m1.dim) if grid is None else grid
    gap = np.abs(U.derivative(m2, grid) - U.derivative(m1, grid))
    lhs = float(np.max(gap / (1.0 + np.linalg.norm(grid, axis=1) ** (cert.ell / 2))))
    tau = difference(m2, m1)
    if tau.size == 0:
        return lhs, 0.0
    mass = math.fsum(
        np.abs(tau.weights)
        * (1.0 + np.linalg.norm(tau.points, axis=1) ** (cert.ell / (2 * cert.alpha)))
    )
    return lhs, cert.holder_const * mass**cert.alpha


def split_bound_probe(
    U: Functional, m1: DiscreteMeasure, m2: DiscreteMeasure, grid: np.ndarray | None = None
) -> tuple[float, float]:
    """Probe of the two-term bound used for independent samples.

    Returns (sup_x |δU/δm(m2, x) − δU/δm(m1, x)| / B(x), C) where
    B(x) = (1 + |x|^ℓ)‖m2 − m1‖₀^α + (1 + |x|^{ℓ(1−α)})(∫|y|^ℓ |m2 − m1|(dy))^α.
    """
    cert = U.certificate
    grid = probe_grid(m1.dim) if grid is None else grid
    gap = np.abs(U.derivative(m2, grid) - U.derivative(m1, grid))
    tau = difference(m2, m1)
    if tau.size == 0:
        return 0.0, cert.split_const
    radial = np.linalg.norm(grid, axis=1)
    tv = math.fsum(np.abs(tau.weights))
    tail = math.fsum(np.abs(tau.weights) * np.linalg.norm(tau.points, axis=1) ** cert.ell)
    bound = (1.0 + radial**cert.ell) * tv**cert.alpha + (
        1.0 + radial ** (cert.ell * (1 - cert.alpha))
    ) * tail**cert.alpha
    return float(np.max(gap / bound)), cert.split_const


def _first(x: np.ndarray) -> np.ndarray:
    return x[:, 0]


def _half_squared_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return 0.5 * np.sum((x - y) ** 2, axis=1)


def _build_catalog() -> dict[str, Callable[[], Functional]]:
    return {
        "linear:identity": lambda: LinearFunctional(
            "linear:identity", _first, RegularityCertificate(ell=2, growth_const=1.0)
        ),
        "linear:square": lambda: LinearFunctional(
            "linear:square",
            lambda x: np.sum(x * x, axis=1),
            RegularityCertificate(ell=4, growth_const=1.0),
        ),
        "linear:constant": lambda: LinearFunctional(
            "linear:constant",
            lambda x: np.ones(x.shape[0]),
            RegularityCertificate(ell=0, growth_const=1.0),
        ),
        "ustat2:variance": lambda: UStatistic(
            "ustat2:variance",
            2,
            _half_squared_distance,
            RegularityCertificate(ell=6, growth_const=5.0, holder_const=2.0, split_const=2.0),
        ),
        "ustat2:mean-difference": lambda: UStatistic(
            "ustat2:mean-difference",
            2,
            lambda x, y: np.linalg.norm(x - y, axis=1),
            RegularityCertificate(ell=3, growth_const=2.0, holder_const=2.0, split_const=2.0),
        ),
        "ustat3:product": lambda: UStatistic(
            "ustat3:product",
            3,
            lambda x, y, z: x[:, 0] * y[:, 0] * z[:, 0],
            RegularityCertificate(ell=3, growth_const=12.0, holder_const=7.0, split_const=12.0),
        ),
        "composite:square-of-mean": lambda: CompositeFunctional(
            "composite:square-of-mean",
            lambda t: t * t,
            lambda t: 2.0 * t,
            _first,
            RegularityCertificate(ell=2, growth_const=4.0, holder_const=2.0, split_const=2.0),
        ),
        "composite:exp-mean": lambda: CompositeFunctional(
            "composite:exp-mean",
            np.exp,
            np.exp,
            _first,
            RegularityCertificate(ell=2, growth_const=7.5, holder_const=7.5, split_const=4.0),
        ),
    }


_CATALOG = _build_catalog()


def catalog_ids() -> list[str]:
    return sorted(_CATALOG)


def get_functional(functional_id: str) -> Functional:
    """Resolve a catalog id such as `ustat2:variance`."""
    try:
        factory = _CATALOG[functional_id]
    except KeyError:
        raise UnknownFunctional(functional_id) from None
    return factory()

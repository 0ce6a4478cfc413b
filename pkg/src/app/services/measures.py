"""Discrete probability and signed measures on R^d.

All measures are immutable and consolidated: atoms are unique points in
lexicographic order. Points compare by exact coordinate equality, so
empirical measures built from sampled values merge without tolerances.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from app.core.errors import DimensionMismatch, EmptyMeasure, InvalidMeasure, SupportMismatch

WEIGHT_SUM_TOL = 1e-12


def as_points(points: object, dim: int | None = None) -> np.ndarray:
    """Coerce to a (k, d) float array; a flat sequence of scalars is read as d = 1."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim is None else arr.reshape(-1, dim)
    if arr.ndim != 2:
        raise InvalidMeasure(f"points must be a (k, d) array, got shape {arr.shape}")
    if dim is not None and arr.shape[0] and arr.shape[1] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidMeasure("point coordinates must be finite")
    # -0.0 + 0.0 == +0.0
    return arr + 0.0


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.setflags(write=False)


def _merge(points: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge duplicate points by weight addition, in lexicographic order."""
    if points.shape[0] == 0:
        return points, weights
    uniq, inverse = np.unique(points, axis=0, return_inverse=True)
    merged = np.bincount(inverse.reshape(-1), weights=weights, minlength=uniq.shape[0])
    return uniq, merged


def _is_canonical(points: np.ndarray) -> bool:
    if points.shape[0] <= 1:
        return True
    uniq = np.unique(points, axis=0)
    return uniq.shape == points.shape and bool(np.array_equal(uniq, points))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability measure Σ w_i δ_{x_i}; build it with `consolidate` or `empirical`."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.points.ndim != 2 or self.weights.shape != (self.points.shape[0],):
            raise InvalidMeasure("points/weights shape mismatch")
        if self.points.shape[0] == 0:
            raise EmptyMeasure("a probability measure needs at least one atom")
        if not np.all(self.weights > 0):
            raise InvalidMeasure("atom weights must be positive after consolidation")
        if abs(math.fsum(self.weights) - 1.0) >= WEIGHT_SUM_TOL:
            raise InvalidMeasure("weights must sum to 1")
        if not _is_canonical(self.points):
            raise InvalidMeasure("atoms must be unique and in lexicographic order")
        _freeze(self.points, self.weights)

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    def integrate(self, values: np.ndarray) -> float:
        """Σ w_i v_i for values given atomwise."""
        return math.fsum(self.weights * np.asarray(values, dtype=float))

    def to_signed(self) -> SignedDiscreteMeasure:
        return SignedDiscreteMeasure(self.points, self.weights.copy(), self.dim)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(
            self.weights, other.weights
        )

    def __hash__(self) -> int:
        return hash((self.points.tobytes(), self.weights.tobytes()))

    def __repr__(self) -> str:
        return f"DiscreteMeasure(dim={self.dim}, atoms={self.size})"


@dataclass(frozen=True, eq=False)
class SignedDiscreteMeasure:
    """Finite signed measure; atoms with zero weight are dropped."""

    points: np.ndarray
    weights: np.ndarray
    dim: int

    def __post_init__(self) -> None:
        if self.points.shape != (self.weights.shape[0], self.dim):
            raise InvalidMeasure("points/weights shape mismatch")
        if np.any(self.weights == 0.0):
            raise InvalidMeasure("signed measures carry no zero-weight atoms")
        if not _is_canonical(self.points):
            raise InvalidMeasure("atoms must be unique and in lexicographic order")
        _freeze(self.points, self.weights)

    @classmethod
    def zero(cls, dim: int) -> SignedDiscreteMeasure:
        return cls(np.zeros((0, dim)), np.zeros(0), dim)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def positive_part(self) -> SignedDiscreteMeasure:
        keep = self.weights > 0
        return SignedDiscreteMeasure(self.points[keep], self.weights[keep], self.dim)

    def negative_part(self) -> SignedDiscreteMeasure:
        keep = self.weights < 0
        return SignedDiscreteMeasure(self.points[keep], -self.weights[keep], self.dim)

    def total_variation(self) -> SignedDiscreteMeasure:
        """|τ| = τ⁺ + τ⁻."""
        return SignedDiscreteMeasure(self.points, np.abs(self.weights), self.dim)

    def integrate(self, values: np.ndarray) -> float:
        return math.fsum(self.weights * np.asarray(values, dtype=float))

    def scale(self, factor: float) -> SignedDiscreteMeasure:
        return consolidate_signed(self.points, self.weights * factor, self.dim)

    def __add__(self, other: SignedDiscreteMeasure) -> SignedDiscreteMeasure:
        _check_dims(self.dim, other.dim)
        return consolidate_signed(
            np.vstack([self.points, other.points]),
            np.concatenate([self.weights, other.weights]),
            self.dim,
        )

    def __sub__(self, other: SignedDiscreteMeasure) -> SignedDiscreteMeasure:
        return self + other.scale(-1.0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SignedDiscreteMeasure):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self) -> int:
        return hash((self.dim, self.points.tobytes(), self.weights.tobytes()))

    def __repr__(self) -> str:
        return f"SignedDiscreteMeasure(dim={self.dim}, atoms={self.size})"


@dataclass(frozen=True, eq=False)
class ProductMeasure2d:
    """Probability measure on R^d × R^d stored as atoms of R^{2d}."""

    joint: DiscreteMeasure
    dim: int

    def __post_init__(self) -> None:
        if self.joint.dim != 2 * self.dim:
            raise DimensionMismatch("joint atoms must live in R^{2d}")

    @property
    def left(self) -> np.ndarray:
        return self.joint.points[:, : self.dim]

    @property
    def right(self) -> np.ndarray:
        return self.joint.points[:, self.dim :]

    @property
    def weights(self) -> np.ndarray:
        return self.joint.weights

    def marginal1(self) -> DiscreteMeasure:
        return consolidate(self.left, self.weights)

    def marginal2(self) -> DiscreteMeasure:
        return consolidate(self.right, self.weights)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProductMeasure2d):
            return NotImplemented
        return self.dim == other.dim and self.joint == other.joint

    def __hash__(self) -> int:
        return hash((self.dim, hash(self.joint)))


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise DimensionMismatch(f"dimension mismatch: {a} vs {b}")


def consolidate(points: object, weights: object) -> DiscreteMeasure:
    """Merge duplicates, drop zero weights, renormalize, sort lexicographically."""
    pts = as_points(points)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != pts.shape[0]:
        raise InvalidMeasure(f"{pts.shape[0]} points but {w.shape[0]} weights")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidMeasure("weights must be finite and nonnegative")
    uniq, merged = _merge(pts, w)
    keep = merged > 0
    uniq, merged = uniq[keep], merged[keep]
    total = math.fsum(merged)
    if total <= 0:
        raise EmptyMeasure("all atom weights are zero")
    return DiscreteMeasure(np.ascontiguousarray(uniq), merged / total)


def consolidate_signed(points: object, weights: object, dim: int) -> SignedDiscreteMeasure:
    pts = as_points(points, dim) if np.size(points) else np.zeros((0, dim))
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != pts.shape[0]:
        raise InvalidMeasure(f"{pts.shape[0]} points but {w.shape[0]} weights")
    if not np.all(np.isfinite(w)):
        raise InvalidMeasure("weights must be finite")
    uniq, merged = _merge(pts, w)
    keep = merged != 0.0
    return SignedDiscreteMeasure(np.ascontiguousarray(uniq[keep]), merged[keep], dim)


def empirical(points: object) -> DiscreteMeasure:
    """μ_N = (1/N) Σ δ_{X_i}."""
    pts = as_points(points)
    n = pts.shape[0]
    if n == 0:
        raise EmptyMeasure("empirical measure of an empty sample")
    uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
    counts = np.bincount(inverse.reshape(-1), minlength=uniq.shape[0])
    return DiscreteMeasure(np.ascontiguousarray(uniq), counts / n)


def dirac(point: object) -> DiscreteMeasure:
    return consolidate(np.atleast_1d(np.asarray(point, dtype=float)).reshape(1, -1), [1.0])


def moment(m: DiscreteMeasure, ell: float) -> float:
    """Σ w_i |x_i|^ℓ with the Euclidean norm."""
    if ell < 0:
        raise InvalidMeasure("moment order must be nonnegative")
    return m.integrate(np.linalg.norm(m.points, axis=1) ** ell)


def weighted_norm_ell(tau: SignedDiscreteMeasure, ell: float) -> float:
    """‖τ‖_ℓ = Σ |w_i| (1 + |x_i|^ℓ), attained by f = sign(w_i)(1 + |x_i|^ℓ)."""
    if tau.size == 0:
        return 0.0
    radial = np.linalg.norm(tau.points, axis=1) ** ell
    return math.fsum(np.abs(tau.weights) * (1.0 + radial))


def difference(m1: DiscreteMeasure, m2: DiscreteMeasure) -> SignedDiscreteMeasure:
    """m1 − m2 as a signed measure."""
    _check_dims(m1.dim, m2.dim)
    return consolidate_signed(
        np.vstack([m1.points, m2.points]),
        np.concatenate([m1.weights, -m2.weights]),
        m1.dim,
    )


def mixture(measures: Sequence[DiscreteMeasure], coefficients: Iterable[float]) -> DiscreteMeasure:
    """Σ c_j m_j for nonnegative coefficients summing to 1."""
    coeffs = np.asarray(list(coefficients), dtype=float)
    if len(measures) == 0 or coeffs.shape[0] != len(measures):
        raise InvalidMeasure("need one coefficient per measure")
    dim = measures[0].dim
    for m in measures[1:]:
        _check_dims(dim, m.dim)
    points = np.vstack([m.points for m in measures])
    weights = np.concatenate([c * m.weights for c, m in zip(coeffs, measures)])
    return consolidate(points, weights)


def add_signed(m: DiscreteMeasure, tau: SignedDiscreteMeasure) -> DiscreteMeasure:
    """m + τ, which must again be a probability measure."""
    _check_dims(m.dim, tau.dim)
    if abs(tau.total_mass()) > WEIGHT_SUM_TOL:
        raise InvalidMeasure("perturbation must have total mass 0")
    signed = consolidate_signed(
        np.vstack([m.points, tau.points]), np.concatenate([m.weights, tau.weights]), m.dim
    )
    if np.any(signed.weights < 0):
        raise InvalidMeasure("perturbed weights became negative")
    return consolidate(signed.points, signed.weights)


def product_measure(m1: DiscreteMeasure, m2: DiscreteMeasure) -> ProductMeasure2d:
    """m1 ⊗ m2."""
    _check_dims(m1.dim, m2.dim)
    left = np.repeat(m1.points, m2.size, axis=0)
    right = np.tile(m2.points, (m1.size, 1))
    weights = np.outer(m1.weights, m2.weights).reshape(-1)
    return pair_measure(left, right, weights)


def pair_measure(left: np.ndarray, right: np.ndarray, weights: np.ndarray) -> ProductMeasure2d:
    left, right = as_points(left), as_points(right)
    _check_dims(left.shape[1], right.shape[1])
    return ProductMeasure2d(consolidate(np.hstack([left, right]), weights), left.shape[1])


def support_union(*measures: DiscreteMeasure | SignedDiscreteMeasure) -> np.ndarray:
    """Canonical (sorted, unique) union of the atoms of the given measures."""
    dims = {m.dim for m in measures}
    if len(dims) != 1:
        raise DimensionMismatch(f"dimension mismatch: {sorted(dims)}")
    stacked = np.vstack([m.points for m in measures])
    return np.unique(stacked, axis=0)


def locate(support: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Indices of `points` inside a canonical `support`; every point must be an atom."""
    points = as_points(points, support.shape[1])
    if points.shape[0] == 0:
        return np.zeros(0, dtype=np.intp)
    uniq, inverse = np.unique(np.vstack([support, points]), axis=0, return_inverse=True)
    if uniq.shape[0] != support.shape[0]:
        raise SupportMismatch("points outside the reference support")
    return inverse.reshape(-1)[support.shape[0] :]


def weights_on(m: DiscreteMeasure | SignedDiscreteMeasure, support: np.ndarray) -> np.ndarray:
    """The weight vector of `m` laid out over a canonical support containing it."""
    out = np.zeros(support.shape[0])
    if m.size:
        out[locate(support, m.points)] = m.weights
    return out

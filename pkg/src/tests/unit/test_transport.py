import itertools

import numpy as np
import ot
import pytest
from scipy.optimize import linprog

from app.core.errors import DimensionMismatch, ExactSolverLimit, InputError
from app.services.measures import consolidate, dirac, empirical, mixture, pair_measure, product_measure
from app.services.sequences import CyclicFamily
from app.services.transport import (
    MAX_SUPPORT,
    d_v_beta,
    product_wasserstein,
    wasserstein,
    wasserstein0,
    wasserstein0_plan,
    wasserstein_power,
)


def _lp_cost(m1, m2, cost: np.ndarray) -> float:
    """Optimal cost by a linear program over all couplings."""
    k1, k2 = cost.shape
    rows = np.kron(np.eye(k1), np.ones(k2))
    cols = np.kron(np.ones(k1), np.eye(k2))
    result = linprog(
        cost.ravel(),
        A_eq=np.vstack([rows, cols]),
        b_eq=np.concatenate([m1.weights, m2.weights]),
        bounds=(0, None),
        method="highs",
    )
    assert result.status == 0
    return result.fun


def _permutation_cost(x: np.ndarray, y: np.ndarray, ell: float) -> float:
    """Brute force over permutations for two uniform measures of equal size."""
    n = len(x)
    best = np.inf
    for perm in itertools.permutations(range(n)):
        cost = np.mean(np.linalg.norm(x - y[list(perm)], axis=1) ** ell)
        best = min(best, cost)
    return best


def test_identical_measures_have_zero_distance(fair_coin) -> None:
    distance, plan = wasserstein(fair_coin, fair_coin, 2)
    assert distance == 0.0
    assert np.array_equal(plan.mass, np.diag(fair_coin.weights))


def test_single_atoms_give_their_distance() -> None:
    distance, _ = wasserstein(dirac(1.5), dirac(-2.0), 1)
    assert distance == pytest.approx(3.5)


def test_diracs_in_the_plane() -> None:
    distance, _ = wasserstein(dirac([0.0, 0.0]), dirac([3.0, 4.0]), 2)
    assert distance == pytest.approx(5.0)


def test_subunit_ell_has_no_outer_root() -> None:
    value = wasserstein(dirac(0.0), dirac(4.0), 0.5)[0]
    assert value == pytest.approx(2.0)


def test_uniform_measures_match_permutation_oracle(rng: np.random.Generator) -> None:
    """50 random equal-size uniform pairs, d in {1, 2}, ell in {1, 2}."""
    for trial in range(50):
        d = 1 + trial % 2
        ell = 1 + (trial // 2) % 2
        n = int(rng.integers(1, 7))
        x = rng.normal(size=(n, d))
        y = rng.normal(size=(n, d))
        m1, m2 = empirical(x), empirical(y)
        expected = _permutation_cost(x, y, ell)
        assert wasserstein_power(m1, m2, ell) == pytest.approx(expected, abs=1e-9)


def test_unequal_supports_match_lp_oracle(rng: np.random.Generator) -> None:
    for trial in range(20):
        d = 1 + trial % 2
        ell = 1 + (trial // 2) % 2
        x = rng.normal(size=(int(rng.integers(1, 7)), d))
        y = rng.normal(size=(int(rng.integers(1, 7)), d))
        m1 = consolidate(x, rng.random(len(x)) + 0.1)
        m2 = consolidate(y, rng.random(len(y)) + 0.1)
        cost = ot.dist(m1.points, m2.points, metric="euclidean") ** ell
        assert wasserstein_power(m1, m2, ell) == pytest.approx(_lp_cost(m1, m2, cost), abs=1e-9)


def test_plan_has_the_right_marginals(rng: np.random.Generator) -> None:
    m1 = consolidate(rng.normal(size=(5, 2)), np.full(5, 0.2))
    m2 = consolidate(rng.normal(size=(4, 2)), np.full(4, 0.25))
    _, plan = wasserstein(m1, m2, 2)
    assert np.allclose(plan.mass.sum(axis=1), m1.weights, atol=1e-10)
    assert np.allclose(plan.mass.sum(axis=0), m2.weights, atol=1e-10)
    assert all(mass > 0 for _, _, mass in plan.entries())


def test_matches_library_value() -> None:
    m1 = consolidate([0.0, 1.0, 3.0], [0.2, 0.5, 0.3])
    m2 = consolidate([0.5, 2.0], [0.6, 0.4])
    cost = ot.dist(m1.points, m2.points, metric="euclidean") ** 2
    value, plan = wasserstein(m1, m2, 2)
    assert plan.cost == pytest.approx(ot.emd2(m1.weights, m2.weights, cost), abs=1e-14)
    assert value == pytest.approx(np.sqrt(plan.cost))


def test_w0_caps_the_ground_cost() -> None:
    assert wasserstein0(dirac(0.0), dirac(10.0)) == pytest.approx(1.0)
    assert wasserstein0(dirac(0.0), dirac(0.25)) == pytest.approx(0.25)


def test_w0_bounded_by_one(rng: np.random.Generator) -> None:
    for _ in range(10):
        m1 = empirical(rng.normal(scale=5, size=(4, 1)))
        m2 = empirical(rng.normal(scale=5, size=(3, 1)))
        assert 0.0 <= wasserstein0(m1, m2) <= 1.0
        assert wasserstein0_plan(m1, m2).cost == pytest.approx(wasserstein0(m1, m2))


def test_w0_is_symmetric_and_metric_like(rng: np.random.Generator) -> None:
    m1, m2, m3 = (empirical(rng.normal(size=(3, 1))) for _ in range(3))
    assert wasserstein0(m1, m2) == pytest.approx(wasserstein0(m2, m1))
    assert wasserstein0(m1, m3) <= wasserstein0(m1, m2) + wasserstein0(m2, m3) + 1e-12


def test_negative_or_zero_ell_is_rejected(fair_coin) -> None:
    with pytest.raises(InputError):
        wasserstein(fair_coin, fair_coin, 0)


def test_dimension_mismatch(fair_coin) -> None:
    with pytest.raises(DimensionMismatch):
        wasserstein(fair_coin, dirac([0.0, 0.0]), 1)


def test_exact_solver_limit() -> None:
    big = empirical(np.arange(MAX_SUPPORT, dtype=float))
    with pytest.raises(ExactSolverLimit):
        wasserstein(big, dirac(0.5), 1)


def test_product_wasserstein_of_diagonal_pairs(fair_coin) -> None:
    """W between the diagonal coupling and the independent one, read on R^2."""
    diagonal = pair_measure([[0.0], [1.0]], [[0.0], [1.0]], [0.5, 0.5])
    independent = product_measure(fair_coin, fair_coin)
    value = product_wasserstein(diagonal, independent, 2)
    # the off-diagonal mass 1/2 moves distance 1 at best
    assert value == pytest.approx(np.sqrt(0.5))
    assert product_wasserstein(diagonal, diagonal, 2) == 0.0


def test_d_v_beta_weights_by_v() -> None:
    states = np.array([[0.0], [1.0]])
    theta = consolidate([0.0, 1.0], [0.4, 0.6])
    sigma = dirac(0.0)
    v = np.array([0.0, 1.0])
    # |0.4 - 1| * 1 + |0.6 - 0| * (1 + 0.5)
    assert d_v_beta(theta, sigma, states, v, 0.5) == pytest.approx(0.6 + 0.9)


def _random_measure(rng: np.random.Generator, atoms: int, dim: int):
    return consolidate(rng.normal(size=(atoms, dim)), rng.dirichlet(np.ones(atoms)))


@pytest.mark.parametrize("ell", [1, 2])
def test_symmetry_and_triangle_inequality(rng: np.random.Generator, ell: int) -> None:
    for _ in range(50):
        a, b, c = (_random_measure(rng, 4, 2) for _ in range(3))
        ab = wasserstein(a, b, ell)[0]
        assert ab == pytest.approx(wasserstein(b, a, ell)[0], abs=1e-9)
        assert wasserstein(a, c, ell)[0] <= ab + wasserstein(b, c, ell)[0] + 1e-9


@pytest.mark.parametrize("ell", [0.5, 1, 2])
def test_cost_is_convex_in_the_first_argument(rng: np.random.Generator, ell: float) -> None:
    for _ in range(20):
        m1, m2, mu = (_random_measure(rng, 3, 2) for _ in range(3))
        s = rng.random()
        mixed = wasserstein_power(mixture([m1, m2], [s, 1 - s]), mu, ell)
        bound = s * wasserstein_power(m1, mu, ell) + (1 - s) * wasserstein_power(m2, mu, ell)
        assert mixed <= bound + 1e-9


@pytest.mark.parametrize("ell", [1, 2])
def test_mixing_towards_the_target_shrinks_the_cost(rng: np.random.Generator, ell: int) -> None:
    n = 10
    for _ in range(10):
        m, mu = _random_measure(rng, 4, 1), _random_measure(rng, 3, 1)
        full = wasserstein_power(m, mu, ell)
        for i in range(1, n):
            shrunk = wasserstein_power(mixture([m, mu], [i / n, 1 - i / n]), mu, ell)
            assert shrunk <= i / n * full + 1e-9


@pytest.mark.parametrize("ell", [1, 2])
def test_product_distance_bounds_the_marginal_distance(rng: np.random.Generator, ell: int) -> None:
    for _ in range(20):
        p1, p2 = (
            pair_measure(rng.normal(size=(4, 1)), rng.normal(size=(4, 1)), rng.dirichlet(np.ones(4)))
            for _ in range(2)
        )
        marginal = wasserstein(p1.marginal1(), p2.marginal1(), ell)[0]
        assert marginal <= product_wasserstein(p1, p2, ell) + 1e-9


@pytest.mark.parametrize("n", [10, 11, 100, 101])
def test_alternating_diracs_pair_mixture_distance(n: int) -> None:
    """Odd N leaves mass 1/(2N) on the wrong diagonal atom, √2 away: √N W_2 = 1."""
    fam = CyclicFamily([dirac(0.0), dirac(1.0)])
    scaled = np.sqrt(n) * product_wasserstein(fam.pair_mixture(n), fam.limit_data().eta, 2)
    assert scaled == pytest.approx(n % 2, abs=1e-12)


def test_d_v_beta_matches_sign_enumeration(rng: np.random.Generator) -> None:
    states = np.arange(5, dtype=float).reshape(-1, 1)
    for _ in range(20):
        theta = consolidate(states, rng.dirichlet(np.ones(5)))
        sigma = consolidate(states, rng.dirichlet(np.ones(5)))
        v, beta = rng.exponential(size=5), rng.uniform(0.05, 2.0)
        gap = theta.weights - sigma.weights
        best = max(
            abs(float(gap @ (np.array(signs) * (1.0 + beta * v))))
            for signs in itertools.product((-1.0, 1.0), repeat=5)
        )
        assert d_v_beta(theta, sigma, states, v, beta) == pytest.approx(best, rel=1e-12)

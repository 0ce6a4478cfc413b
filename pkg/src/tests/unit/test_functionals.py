import numpy as np
import pytest

from app.core.errors import CostLimit, InputError, UnknownFunctional
from app.services.functionals import (
    CompositeFunctional,
    RegularityCertificate,
    UStatistic,
    catalog_ids,
    finite_difference_identity_residual,
    get_functional,
    growth_probe,
    holder_modulus_probe,
    split_bound_probe,
)
from app.services.measures import consolidate, dirac, empirical, mixture


def _random_measure(rng: np.random.Generator, atoms: int = 5, low: float = -1.0, high: float = 1.0):
    return consolidate(rng.uniform(low, high, size=atoms), rng.random(atoms) + 0.05)


def test_catalog_lists_every_builtin() -> None:
    assert catalog_ids() == [
        "composite:exp-mean",
        "composite:square-of-mean",
        "linear:constant",
        "linear:identity",
        "linear:square",
        "ustat2:mean-difference",
        "ustat2:variance",
        "ustat3:product",
    ]


def test_unknown_id_is_echoed() -> None:
    with pytest.raises(UnknownFunctional, match="ustat9:nope"):
        get_functional("ustat9:nope")


def test_linear_identity_is_the_mean(fair_coin) -> None:
    U = get_functional("linear:identity")
    assert U.is_linear
    assert U.evaluate(fair_coin) == 0.5
    assert U.derivative(fair_coin, [[-3.0], [2.0]]).tolist() == [-3.0, 2.0]


def test_linear_derivative_ignores_the_measure() -> None:
    U = get_functional("linear:square")
    a = U.derivative(dirac(0.0), [[2.0]])
    b = U.derivative(dirac(5.0), [[2.0]])
    assert a.tolist() == b.tolist() == [4.0]


def test_variance_ustatistic_value_and_derivative(fair_coin) -> None:
    U = get_functional("ustat2:variance")
    assert U.evaluate(fair_coin) == pytest.approx(0.25)
    x = np.array([[-1.0], [0.0], [0.5], [2.0]])
    # x^2 - 2 x mean(m), anchored at 0
    expected = x[:, 0] ** 2 - 2 * x[:, 0] * 0.5
    assert U.derivative(fair_coin, x) == pytest.approx(expected)


def test_ustatistic_derivatives_vanish_at_the_anchor(rng: np.random.Generator) -> None:
    m = _random_measure(rng)
    for fid in ("ustat2:variance", "ustat2:mean-difference", "ustat3:product"):
        assert get_functional(fid).derivative_at(m, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_product_ustatistic_is_the_cubed_mean(rng: np.random.Generator) -> None:
    m = _random_measure(rng)
    mean = float(m.weights @ m.points[:, 0])
    U = get_functional("ustat3:product")
    assert U.evaluate(m) == pytest.approx(mean**3)
    assert U.derivative_at(m, 1.5) == pytest.approx(3 * 1.5 * mean**2)


def test_composite_square_of_mean(fair_coin) -> None:
    U = get_functional("composite:square-of-mean")
    assert U.evaluate(fair_coin) == 0.25
    assert U.derivative_at(fair_coin, 3.0) == pytest.approx(3.0)


def test_batch_evaluation_matches_single_evaluations(rng: np.random.Generator) -> None:
    support = np.array([[-1.0], [0.0], [2.0]])
    weights = rng.dirichlet(np.ones(3), size=4)
    for fid in catalog_ids():
        U = get_functional(fid)
        batch = U.evaluate_batch(support, weights)
        singles = [U.evaluate(consolidate(support, w)) for w in weights]
        assert batch == pytest.approx(singles, rel=1e-12, abs=1e-14)


def test_derivative_identity_is_exact_for_polynomial_functionals(rng: np.random.Generator) -> None:
    """U(m') - U(m) equals the integrated derivative along the segment, with n nodes."""
    cases = [("linear:identity", 2), ("linear:square", 2), ("ustat2:variance", 2), ("ustat3:product", 3)]
    for fid, nodes in cases:
        U = get_functional(fid)
        for _ in range(100):
            m = _random_measure(rng, int(rng.integers(1, 6)), -2, 2)
            m_prime = _random_measure(rng, int(rng.integers(1, 6)), -2, 2)
            assert finite_difference_identity_residual(U, m, m_prime, nodes) <= 1e-12


def test_derivative_identity_for_composite_needs_more_nodes(rng: np.random.Generator) -> None:
    U = get_functional("composite:exp-mean")
    m, m_prime = _random_measure(rng), _random_measure(rng)
    assert finite_difference_identity_residual(U, m, m_prime, 12) <= 1e-12


def test_quadrature_needs_two_nodes(fair_coin) -> None:
    with pytest.raises(InputError):
        finite_difference_identity_residual(get_functional("linear:identity"), fair_coin, fair_coin, 1)


def test_asymmetric_kernel_is_rejected() -> None:
    with pytest.raises(InputError, match="not symmetric"):
        UStatistic("bad", 2, lambda x, y: x[:, 0], RegularityCertificate(ell=2))


def test_wrong_outer_derivative_is_rejected() -> None:
    with pytest.raises(InputError):
        CompositeFunctional("bad", np.exp, np.sin, lambda x: x[:, 0], RegularityCertificate(ell=2))


def test_certificate_validation() -> None:
    with pytest.raises(InputError):
        RegularityCertificate(ell=2, alpha=0.5)
    with pytest.raises(InputError):
        RegularityCertificate(ell=2, radius=0.0)


def test_cost_limit_on_large_supports() -> None:
    m = empirical(np.arange(500, dtype=float))
    with pytest.raises(CostLimit):
        get_functional("ustat3:product").evaluate(m)


def test_regularity_checks_respect_the_declared_constants(rng: np.random.Generator) -> None:
    """Measures supported in [-1, 1]: growth, Hölder and two-term bounds all hold."""
    for fid in catalog_ids():
        U = get_functional(fid)
        for _ in range(10):
            m1, m2 = _random_measure(rng), _random_measure(rng)
            observed, declared = growth_probe(U, m1)
            assert observed <= declared
            lhs, rhs = holder_modulus_probe(U, m1, m2)
            assert lhs <= rhs + 1e-12
            ratio, constant = split_bound_probe(U, m1, m2)
            assert ratio <= constant


def test_holder_modulus_of_equal_measures(fair_coin) -> None:
    lhs, rhs = holder_modulus_probe(get_functional("ustat2:variance"), fair_coin, fair_coin)
    assert lhs == 0.0
    assert rhs == 0.0


@pytest.mark.parametrize(
    "fid",
    ["linear:identity", "ustat2:variance", "ustat2:mean-difference", "ustat3:product", "composite:exp-mean"],
)
def test_first_variation_is_the_directional_derivative(rng: np.random.Generator, fid: str) -> None:
    """|U(m + eps (m' - m)) - U(m) - eps ∫ δU/δm(m, ·) d(m' - m)| <= 20 eps^2 on [-1, 1]."""
    U = get_functional(fid)
    points = rng.uniform(-1.0, 1.0, size=6)
    for _ in range(10):
        m = consolidate(points, rng.random(6) + 0.05)
        m_prime = consolidate(points, rng.random(6) + 0.05)
        slope = float(U.derivative(m, m.points) @ (m_prime.weights - m.weights))
        for eps in (1e-3, 1e-4):
            moved = mixture([m, m_prime], [1 - eps, eps])
            gap = U.evaluate(moved) - U.evaluate(m) - eps * slope
            assert abs(gap) <= 20 * eps**2


def test_variance_ustatistic_is_the_population_variance(rng: np.random.Generator) -> None:
    U = get_functional("ustat2:variance")
    for _ in range(20):
        m = _random_measure(rng, atoms=int(rng.integers(1, 8)), low=-3.0, high=3.0)
        x = m.points[:, 0]
        expected = m.integrate(x * x) - m.integrate(x) ** 2
        assert U.evaluate(m) == pytest.approx(expected, rel=1e-10, abs=1e-12)

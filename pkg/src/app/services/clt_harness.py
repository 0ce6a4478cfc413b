"""Monte Carlo checks of the functional CLTs.

An experiment replicates Z_N = √N(U(μ_N) − U(μ)) over independent paths,
compares the sample against the Gaussian the theorems predict and, on
request, traces the linearization U(μ_N) − U(base) = Q_N + R_N along the
interpolating measures μ_N^{i,0}.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

from app.core.errors import (
    ConfigError,
    ConvergenceFailure,
    Degenerate,
    InputError,
    Unsupported,
)
from app.services import streams
from app.services.functionals import Functional, UStatistic
from app.services.markov import MarkovModel, asymptotic_variance_markov
from app.services.measures import DiscreteMeasure, consolidate, dirac, empirical, locate, weights_on
from app.services.sequences import AR1Family, MarkovFamily, SequenceFamily
from app.services.transport import wasserstein, wasserstein0

logger = logging.getLogger(__name__)

MIN_PATH_LENGTH = 10
MIN_REPLICATIONS = 100
REMAINDER_REPLICATIONS = 200
VARIANCE_SLACK = 1e-12


class PredictionSource(str, Enum):
    INDEPENDENT = "IndependentTheorem"
    MARKOV = "MarkovTheorem"
    AR1 = "AR1Analytic"


@dataclass(frozen=True)
class Prediction:
    mean: float
    variance: float
    source: PredictionSource
    iid_variance: float

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "source": self.source.value,
            "iid_variance": self.iid_variance,
        }


@dataclass(frozen=True)
class CltExperiment:
    family: SequenceFamily
    functional: Functional
    n: int
    m: int
    master_seed: int
    decomposition_trace: bool = False
    n_grid: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.n < MIN_PATH_LENGTH:
            raise ConfigError(f"N must be at least {MIN_PATH_LENGTH}")
        if self.m < MIN_REPLICATIONS:
            raise ConfigError(f"M must be at least {MIN_REPLICATIONS}")
        if self.family.ell != self.functional.certificate.ell:
            raise ConfigError(
                f"family ell={self.family.ell} differs from {self.functional.id} "
                f"certificate ell={self.functional.certificate.ell}"
            )
        if any(n < 1 for n in self.n_grid):
            raise ConfigError("N_grid entries must be positive")


@dataclass(frozen=True)
class Decomposition:
    q: float
    r: float
    stopping_index: int

    def truncated(self, n: int) -> bool:
        return self.stopping_index <= n


@dataclass(frozen=True)
class RemainderScaling:
    grid: tuple[int, ...]
    medians: tuple[float, ...]
    slope: float | None

    def to_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "medians": list(self.medians),
            "slope": self.slope,
            "pairs": [[n, med] for n, med in zip(self.grid, self.medians)],
        }


@dataclass(frozen=True, eq=False)
class CltReport:
    samples: np.ndarray
    predicted: Prediction
    empirical_mean: float
    empirical_variance: float
    ks_statistic: float | None
    ks_pvalue: float | None
    degenerate: bool
    n: int
    m: int
    functional_id: str
    family_kind: str
    master_seed: int
    decomposition: RemainderScaling | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        """JSON-ready view; numbers are plain floats so re-serialization is stable."""
        ks = None
        if self.ks_statistic is not None:
            ks = {"statistic": self.ks_statistic, "pvalue": self.ks_pvalue}
        return {
            "schema": 1,
            "family": self.family_kind,
            "functional": self.functional_id,
            "N": self.n,
            "M": self.m,
            "master_seed": str(self.master_seed),
            "predicted": self.predicted.to_dict(),
            "empirical": {"mean": self.empirical_mean, "variance": self.empirical_variance},
            "ks": ks,
            "degenerate": self.degenerate,
            "decomposition": None if self.decomposition is None else self.decomposition.to_dict(),
            **self.extras,
        }


def sample_moments(samples: np.ndarray) -> tuple[float, float]:
    """Mean and unbiased variance, each summed with fsum."""
    m = len(samples)
    mean = math.fsum(samples) / m
    variance = math.fsum((samples - mean) ** 2) / (m - 1)
    return mean, variance


def target_measure(family: SequenceFamily) -> DiscreteMeasure:
    """μ: the invariant law for chains, the limit law for independent families."""
    if isinstance(family, MarkovFamily):
        return family.model.mu
    if isinstance(family, AR1Family):
        raise Unsupported("AR(1) has a continuous stationary law")
    return family.limit_data().mu


def _check_identity_observable(U: Functional) -> None:
    points = np.array([[-1.0], [0.0], [1.0], [2.5]])
    values = U.derivative(dirac(0.0), points)
    if not (U.is_linear and np.allclose(values - values[1], points[:, 0], atol=1e-12)):
        raise Unsupported("AR(1) predictions exist only for linear U with f(x) = x + c")


def predict(family: SequenceFamily | MarkovModel, U: Functional) -> Prediction:
    """Mean and variance of the limiting Gaussian, by exact sums over supports."""
    if isinstance(family, MarkovModel):
        family = MarkovFamily(family, family.mu, U.certificate.ell)
    if isinstance(family, AR1Family):
        _check_identity_observable(U)
        return Prediction(0.0, family.identity_variance(), PredictionSource.AR1, family.stationary_sd**2)

    mu = target_measure(family)
    f_mu = U.derivative(mu, mu.points)
    iid_variance = mu.integrate(f_mu**2) - mu.integrate(f_mu) ** 2
    if isinstance(family, MarkovFamily):
        variance = asymptotic_variance_markov(family.model, U)
        return Prediction(0.0, max(variance, 0.0), PredictionSource.MARKOV, iid_variance)

    data = family.limit_data()
    mean = data.sigma.integrate(U.derivative(mu, data.sigma.points)) if data.sigma.size else 0.0
    eta = data.eta
    cross = math.fsum(eta.weights * U.derivative(mu, eta.left) * U.derivative(mu, eta.right))
    variance = mu.integrate(f_mu**2) - cross
    scale = max(1.0, mu.integrate(f_mu**2))
    if variance > iid_variance + VARIANCE_SLACK * scale:
        raise ConvergenceFailure(
            f"predicted variance {variance:.6g} exceeds the i.i.d. variance {iid_variance:.6g}"
        )
    if variance < -VARIANCE_SLACK * scale:
        raise ConvergenceFailure(f"predicted variance {variance:.6g} is negative")
    return Prediction(mean, max(variance, 0.0), PredictionSource.INDEPENDENT, iid_variance)


def markov_drift(family: MarkovFamily, U: Functional, n: int) -> float | None:
    """√N E[U(μ_N) − U(μ)] for a chain started in μ, or None outside the exact cases.

    Linear U has no drift. For an order-2 U-statistic only the quadratic term
    ∫∫φ̃ d(μ_N − μ)^{⊗2} survives, with φ̃ the μ-doubly-centered kernel, so
    E = N⁻² [N c_0 + 2 Σ_{k<N} (N − k) c_k] with c_k = Σ μ(x) Pᵏ(x, y) φ̃(x, y).
    """
    model = family.model
    if family.nu1 != model.mu:
        return None
    if U.is_linear:
        return 0.0
    if not isinstance(U, UStatistic) or U.order != 2:
        return None
    states, pi, p = model.states, model.pi, model.kernel
    k = model.size
    phi = U.phi(np.repeat(states, k, axis=0), np.tile(states, (k, 1))).reshape(k, k)
    row = phi @ pi
    centered = phi - row[:, None] - row[None, :] + pi @ row
    weighted = pi[:, None] * centered
    limit = np.outer(np.ones(k), pi)
    total = math.fsum(np.diag(weighted)) * n
    power = np.eye(k)
    for lag in range(1, n):
        power = power @ p
        total += 2.0 * (n - lag) * math.fsum((weighted * power).ravel())
        if np.max(np.abs(power - limit)) < 1e-14:
            break
    return total / n**1.5


def independent_drift(family: SequenceFamily, U: Functional, n: int) -> float | None:
    """√N E[U(μ_N) − U(μ)] for independent X_i, or None outside the exact cases.

    Linear U gives the deterministic split term. An order-2 U-statistic reads
    E∫∫φ dμ_N^{⊗2} = N⁻² [SᵀΦS − ⟨Φ, G⟩ + Sᵀ diag Φ], with S = Σ ν_i and
    G = Σ ν_i ν_iᵀ laid out over the family's support.
    """
    if not family.independent:
        return None
    if U.is_linear:
        return independent_split(family, U, np.zeros((0, family.dim)), n)[0]
    if not isinstance(U, UStatistic) or U.order != 2:
        return None
    support = family.support()
    k = support.shape[0]
    table = family.marginal_table(np.arange(1, n + 1))
    phi = U.phi(np.repeat(support, k, axis=0), np.tile(support, (k, 1))).reshape(k, k)
    total = table.sum(axis=0)
    expected = (total @ phi @ total - np.sum(phi * (table.T @ table)) + total @ np.diag(phi)) / n**2
    return math.sqrt(n) * (expected - U.evaluate(family.limit_data().mu))


def ks_test(samples: np.ndarray, mean: float, variance: float) -> tuple[float, float]:
    """One-sample KS statistic against N(mean, variance) and its asymptotic p-value."""
    samples = np.asarray(samples, dtype=float)
    if len(samples) < MIN_REPLICATIONS:
        raise InputError(f"KS test needs at least {MIN_REPLICATIONS} samples")
    if not variance > 0:
        raise Degenerate("reference normal has nonpositive variance")
    reference = stats.norm(loc=mean, scale=math.sqrt(variance))
    statistic = float(stats.ks_1samp(samples, reference.cdf).statistic)
    pvalue = float(stats.kstwobign.sf(statistic * math.sqrt(len(samples))))
    return statistic, pvalue


def _reference_value(family: SequenceFamily, U: Functional) -> float:
    if isinstance(family, AR1Family):
        return U.evaluate(dirac(0.0))
    return U.evaluate(target_measure(family))


def replicate(family: SequenceFamily, U: Functional, n: int, u_ref: float, master_seed: int, j: int) -> float:
    rng = streams.replication_stream(master_seed, streams.EXPERIMENT, j)
    path = family.sample(n, rng)
    return math.sqrt(n) * (U.evaluate(empirical(path)) - u_ref)


def run_experiment(exp: CltExperiment, threads: int = 1) -> CltReport:
    family, U = exp.family, exp.functional
    predicted = predict(family, U)
    u_ref = _reference_value(family, U)
    logger.info(
        "Running %s on %s: N=%d M=%d seed=%d threads=%d",
        U.id, family.kind, exp.n, exp.m, exp.master_seed, threads,
    )

    def one(j: int) -> float:
        return replicate(family, U, exp.n, u_ref, exp.master_seed, j)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = np.array(list(pool.map(one, range(exp.m))))
    else:
        samples = np.array([one(j) for j in range(exp.m)])
    if not np.all(np.isfinite(samples)):
        raise ConvergenceFailure("non-finite replication value")

    mean, variance = sample_moments(samples)
    degenerate = predicted.variance <= 0
    ks_statistic = ks_pvalue = None
    if degenerate:
        logger.warning("Predicted variance is zero for %s on %s; KS test skipped", U.id, family.kind)
    else:
        ks_statistic, ks_pvalue = ks_test(samples, predicted.mean, predicted.variance)

    decomposition = None
    if exp.decomposition_trace:
        grid = exp.n_grid or (exp.n,)
        decomposition = remainder_scaling(family, U, grid, REMAINDER_REPLICATIONS, exp.master_seed, threads)

    extras = {}
    drift = None
    if family.independent:
        extras["bias"] = independent_split(family, U, np.zeros((0, family.dim)), exp.n)[0]
        drift = independent_drift(family, U, exp.n)
    elif isinstance(family, MarkovFamily):
        drift = markov_drift(family, U, exp.n)
    if drift is not None:
        extras["drift"] = drift
        if not degenerate and drift != predicted.mean:
            # exact finite-N mean, limiting variance
            statistic, pvalue = ks_test(samples, drift, predicted.variance)
            extras["ks_drift_corrected"] = {"statistic": statistic, "pvalue": pvalue}
    return CltReport(
        samples, predicted, mean, variance, ks_statistic, ks_pvalue, degenerate,
        exp.n, exp.m, U.id, family.kind, exp.master_seed, decomposition, extras,
    )


def _distance(m1: DiscreteMeasure, m2: DiscreteMeasure, ell: float) -> float:
    return wasserstein0(m1, m2) if ell == 0 else wasserstein(m1, m2, ell)[0]


def _stopping_index(
    support: np.ndarray, rows: np.ndarray, mu: DiscreteMeasure, radius: float, ell: float
) -> int:
    """First i whose interpolation segment [μ_N^{i,0}, μ_N^{i,1}] leaves B(μ, r); N+1 if none.

    By convexity of W_ℓ along the segment only the endpoints are checked.
    """
    n = rows.shape[0] - 1
    if math.isinf(radius):
        return n + 1
    outside = np.array([_distance(consolidate(support, w), mu, ell) > radius for w in rows])
    for i in range(n):
        if outside[i] or outside[i + 1]:
            logger.warning("Stopping index I_N=%d <= N=%d", i + 1, n)
            return i + 1
    return n + 1


def _interpolation_rows(
    family: SequenceFamily, support: np.ndarray, idx: np.ndarray
) -> tuple[np.ndarray, np.ndarray, DiscreteMeasure]:
    """Weights of μ_N^{i,0} for i = 1..N+1, the reference law of each step, and the base measure."""
    n, k = len(idx), support.shape[0]
    onehot = np.zeros((n, k))
    onehot[np.arange(n), idx] = 1.0
    prefix = np.vstack([np.zeros(k), np.cumsum(onehot, axis=0)]) / n
    if isinstance(family, MarkovFamily):
        mu = family.model.mu
        mu_row = weights_on(mu, support)
        remaining = 1.0 - np.arange(n + 1) / n
        rows = prefix + remaining[:, None] * mu_row[None, :]
        refs = np.broadcast_to(mu_row, (n, k))
        return rows, refs, mu
    refs = family.marginal_table(np.arange(1, n + 1))
    suffix = np.vstack([np.cumsum(refs[::-1], axis=0)[::-1], np.zeros(k)]) / n
    rows = prefix + suffix
    return rows, refs, family.mean_marginal(n)


def decompose_path(path: np.ndarray, family: SequenceFamily, U: Functional) -> Decomposition:
    """Q_N and R_N = (U(μ_N) − U(base)) − Q_N for one sampled path.

    Q_N = (1/N) Σ_i [δU/δm(μ_N^{i∧I_N,0}, X_i) − ∫ δU/δm(μ_N^{i∧I_N,0}, x) ref_i(dx)],
    with ref_i = μ and base = μ for chains, ref_i = ν_i and base = ν̄_N otherwise.
    """
    if isinstance(family, AR1Family):
        raise Unsupported("decomposition needs a finite-support family")
    support = family.support()
    idx = locate(support, path)
    n = len(idx)
    rows, refs, base = _interpolation_rows(family, support, idx)
    stop = _stopping_index(support, rows, target_measure(family), U.certificate.radius, U.certificate.ell)
    used = rows[np.minimum(np.arange(n), stop - 1)]
    derivative = U.derivative_on_support(support, used)
    terms = derivative[np.arange(n), idx] - np.einsum("ik,ik->i", derivative, refs)
    q = math.fsum(terms) / n
    values = U.evaluate_batch(support, np.vstack([rows[-1], weights_on(base, support)]))
    return Decomposition(q, float(values[0] - values[1]) - q, stop)


def remainder_scaling(
    family: SequenceFamily,
    U: Functional,
    n_grid: tuple[int, ...] | list[int],
    replications: int = REMAINDER_REPLICATIONS,
    master_seed: int = 0,
    threads: int = 1,
) -> RemainderScaling:
    """Median |√N R_N| over replications for each N, with the fitted log-log slope."""
    grid = tuple(int(n) for n in n_grid)
    medians = []
    for n in grid:
        def one(j: int, n: int = n) -> float:
            rng = streams.replication_stream(master_seed, streams.REMAINDER_TRACE, n, j)
            return abs(math.sqrt(n) * decompose_path(family.sample(n, rng), family, U).r)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                values = list(pool.map(one, range(replications)))
        else:
            values = [one(j) for j in range(replications)]
        medians.append(float(np.median(values)))
    slope = None
    if len(grid) >= 2 and all(m > 0 for m in medians):
        slope = float(np.polyfit(np.log(grid), np.log(medians), 1)[0])
    logger.debug("Remainder medians %s, slope %s", medians, slope)
    return RemainderScaling(grid, tuple(medians), slope)


def independent_split(
    family: SequenceFamily, U: Functional, path: np.ndarray, n: int | None = None
) -> tuple[float, float | None]:
    """(√N(U(ν̄_N) − U(μ)), √N(U(μ_N) − U(ν̄_N))); the first term is deterministic.

    An empty path yields only the deterministic term.
    """
    if not family.independent:
        raise Unsupported("the bias/fluctuation split applies to independent families")
    n = len(path) if n is None else n
    mean_law = family.mean_marginal(n)
    root = math.sqrt(n)
    bias = root * (U.evaluate(mean_law) - U.evaluate(family.limit_data().mu))
    if len(path) == 0:
        return bias, None
    return bias, root * (U.evaluate(empirical(path)) - U.evaluate(mean_law))


def lln_distance(family: SequenceFamily, path: np.ndarray, ell: float | None = None) -> float:
    """W_ℓ(μ_N, μ) for one path."""
    ell = family.ell if ell is None else ell
    return _distance(empirical(path), target_measure(family), ell)


def lln_check(family: SequenceFamily, n: int, master_seed: int = 0, ell: float | None = None) -> float:
    """W_ℓ(μ_N, μ) on a fresh path drawn from the LLN stream of `master_seed`."""
    if n < 1:
        raise InputError("path length must be at least 1")
    rng = streams.replication_stream(master_seed, streams.LLN_CHECK, n)
    distance = lln_distance(family, family.sample(n, rng), ell)
    logger.debug("LLN check N=%d: W=%.6g", n, distance)
    return distance

"""Poisson-equation report: both solvers on one model, cross-checked."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from app.core.errors import ConvergenceFailure
from app.models.markov import PoissonRequest, PoissonResponse
from app.services.formats import read_model
from app.services.functionals import get_functional
from app.services.markov import (
    MarkovModel,
    PoissonSolution,
    solve_poisson_direct,
    solve_poisson_neumann,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PoissonReport:
    observable: str
    model: MarkovModel
    direct: PoissonSolution
    neumann: PoissonSolution
    solver_gap: float


class PoissonService:
    """Solves F − PF = f − μ(f) for f = δU/δm(μ, ·) of a catalog functional."""

    def solve(self, model: MarkovModel, observable: str, tol: float) -> PoissonReport:
        U = get_functional(observable)
        f = U.derivative(model.mu, model.states)
        direct = solve_poisson_direct(model, f)
        neumann = solve_poisson_neumann(model, None, f, tol)
        gap = float(np.max(np.abs(direct.F - neumann.F)))
        bound = 10 * tol * max(1.0, float(np.max(np.abs(direct.F)))) + 1e-12
        if gap > bound:
            raise ConvergenceFailure(f"direct and Neumann solutions differ by {gap:.3e} (> {bound:.3e})")
        logger.info(
            "Poisson solvers agree to %.3e for %s (%d Neumann terms)", gap, observable, neumann.terms
        )
        return PoissonReport(observable, model, direct, neumann, gap)

    def solve_request(self, request: PoissonRequest) -> PoissonResponse:
        if request.model is not None:
            model = MarkovModel.from_kernel(request.model.states, request.model.kernel)
        else:
            model = read_model(request.model_path)
        report = self.solve(model, request.observable, request.tol)
        return PoissonResponse(
            observable=report.observable,
            states=model.states.tolist(),
            invariant=model.pi.tolist(),
            f=report.direct.f.tolist(),
            F=report.direct.F.tolist(),
            residual=report.direct.residual,
            variance=report.direct.variance,
            neumann_terms=report.neumann.terms,
            neumann_variance=report.neumann.variance,
            solver_gap=report.solver_gap,
        )

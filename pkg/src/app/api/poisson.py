"""Poisson equation API."""

from fastapi import APIRouter

from app.core.deps import PoissonServiceDep
from app.models.markov import PoissonRequest, PoissonResponse

router = APIRouter(prefix="/poisson", tags=["poisson"])


@router.post("/", response_model=PoissonResponse)
def solve_poisson(body: PoissonRequest, poisson_service: PoissonServiceDep) -> PoissonResponse:
    return poisson_service.solve_request(body)

"""Optimal transport API."""

from fastapi import APIRouter

from app.core.deps import DistanceServiceDep
from app.models.measure import Wasserstein0Request, WassersteinRequest, WassersteinResponse

router = APIRouter(prefix="/transport", tags=["transport"])


@router.post("/wasserstein", response_model=WassersteinResponse)
def compute_wasserstein(
    body: WassersteinRequest, distance_service: DistanceServiceDep
) -> WassersteinResponse:
    return distance_service.wasserstein(body.first, body.second, body.ell, body.include_plan)


@router.post("/wasserstein0", response_model=WassersteinResponse)
def compute_wasserstein0(
    body: Wasserstein0Request, distance_service: DistanceServiceDep
) -> WassersteinResponse:
    return distance_service.wasserstein0(body.first, body.second)

import math

from app.core.errors import InvalidMeasure
from app.models.measure import MeasureIn, PlanEntry, SignedMeasureIn, WassersteinResponse
from app.services.measures import (
    WEIGHT_SUM_TOL,
    DiscreteMeasure,
    SignedDiscreteMeasure,
    as_points,
    consolidate,
    consolidate_signed,
)
from app.services.transport import wasserstein, wasserstein0, wasserstein0_plan


def measure_from_schema(body: MeasureIn) -> DiscreteMeasure:
    total = math.fsum(body.weights)
    if abs(total - 1.0) >= WEIGHT_SUM_TOL:
        raise InvalidMeasure(f"weights sum to {total!r}, not 1")
    return consolidate(as_points(body.points), body.weights)


def signed_from_schema(body: SignedMeasureIn, dim: int) -> SignedDiscreteMeasure:
    return consolidate_signed(body.points, body.weights, dim)


class DistanceService:
    def wasserstein(
        self, first: MeasureIn, second: MeasureIn, ell: float, include_plan: bool
    ) -> WassersteinResponse:
        m1, m2 = measure_from_schema(first), measure_from_schema(second)
        if ell == 0:
            plan = wasserstein0_plan(m1, m2)
            distance = plan.cost
        else:
            distance, plan = wasserstein(m1, m2, ell)
        entries = None
        if include_plan:
            entries = [PlanEntry(row=i, col=j, mass=mass) for i, j, mass in plan.entries()]
        return WassersteinResponse(ell=ell, distance=distance, cost=plan.cost, plan=entries)

    def wasserstein0(self, first: MeasureIn, second: MeasureIn) -> WassersteinResponse:
        distance = wasserstein0(measure_from_schema(first), measure_from_schema(second))
        return WassersteinResponse(ell=0.0, distance=distance, cost=distance)

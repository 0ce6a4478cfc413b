"""CLT experiment API."""

from fastapi import APIRouter

from app.core.deps import ExperimentServiceDep
from app.models.experiment import ExperimentConfig
from app.models.run import ExperimentRunResponse, RunRead
from app.services.runs import RunService

router = APIRouter(prefix="/experiments", tags=["experiments"])


@router.post("/run", response_model=ExperimentRunResponse, status_code=201)
def run_experiment(body: ExperimentConfig, experiment_service: ExperimentServiceDep) -> ExperimentRunResponse:
    outcome = experiment_service.run_recorded(body)
    return ExperimentRunResponse(
        run=RunRead.model_validate(outcome.record),
        report=RunService.report_of(outcome.record),
    )

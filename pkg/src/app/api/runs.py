"""Recorded runs API."""

import uuid

from fastapi import APIRouter

from app.core.deps import RunServiceDep
from app.models.run import ExperimentRunResponse, RunRead
from app.services.runs import RunService

router = APIRouter(prefix="/runs", tags=["runs"])


@router.get("/", response_model=list[RunRead])
def list_runs(run_service: RunServiceDep) -> list[RunRead]:
    return run_service.list_runs()


@router.get("/{run_id}", response_model=ExperimentRunResponse)
def get_run(run_id: uuid.UUID, run_service: RunServiceDep) -> ExperimentRunResponse:
    run = run_service.get_run(run_id)
    return ExperimentRunResponse(run=RunRead.model_validate(run), report=RunService.report_of(run))

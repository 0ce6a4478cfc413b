"""Central place for FastAPI dependencies and shared *Dep type aliases."""

from pathlib import Path
from typing import Annotated

from fastapi import Depends
from sqlalchemy.orm import Session

from app.db.session import get_db
from app.services.distances import DistanceService
from app.services.experiments import ExperimentService
from app.services.poisson import PoissonService
from app.services.runs import RunService

SessionDep = Annotated[Session, Depends(get_db)]


def get_run_service(session: SessionDep) -> RunService:
    """Provide RunService for this request."""
    return RunService(session)


def get_experiment_service(session: SessionDep) -> ExperimentService:
    """Provide ExperimentService; relative measure paths resolve from the working directory."""
    return ExperimentService(run_service=RunService(session), base_dir=Path.cwd())


def get_distance_service() -> DistanceService:
    return DistanceService()


def get_poisson_service() -> PoissonService:
    return PoissonService()


RunServiceDep = Annotated[RunService, Depends(get_run_service)]
ExperimentServiceDep = Annotated[ExperimentService, Depends(get_experiment_service)]
DistanceServiceDep = Annotated[DistanceService, Depends(get_distance_service)]
PoissonServiceDep = Annotated[PoissonService, Depends(get_poisson_service)]

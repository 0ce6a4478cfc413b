"""FastAPI application entrypoint."""

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from app.api import experiments, poisson, runs, transport
from app.core.config import settings
from app.core.errors import LabError
from app.core.log import configure_logging

PREFIX = "/api"

configure_logging(settings.log_level)

app = FastAPI(
    title=settings.app_name,
    version=settings.app_version,
    debug=settings.debug,
)


@app.exception_handler(LabError)
async def lab_error_handler(request: Request, exc: LabError) -> JSONResponse:
    """Input errors → 400, resource limits → 413, failed math preconditions → 422."""
    return JSONResponse(status_code=exc.http_status, content={"detail": exc.message})


app.include_router(transport.router, prefix=PREFIX)
app.include_router(poisson.router, prefix=PREFIX)
app.include_router(experiments.router, prefix=PREFIX)
app.include_router(runs.router, prefix=PREFIX)


@app.get("/health")
def health() -> dict[str, str]:
    """Health check endpoint."""
    return {"status": "ok"}

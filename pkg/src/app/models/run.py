"""Recorded experiment run schemas."""

from __future__ import annotations

import uuid
from datetime import datetime
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict


class RunRead(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    id: uuid.UUID
    created_at: datetime
    updated_at: datetime
    config_digest: str
    tool_version: str
    master_seed: str
    functional_id: str
    family_kind: str
    n: int
    m: int
    output_dir: str
    duration_seconds: float
    predicted_mean: float
    predicted_variance: float
    empirical_mean: float
    empirical_variance: float
    ks_statistic: Optional[float] = None
    ks_pvalue: Optional[float] = None
    degenerate: bool


class ExperimentRunResponse(BaseModel):
    run: RunRead
    report: dict[str, Any]

"""Measure and transport API schemas."""

from __future__ import annotations

import math
from typing import Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class SignedMeasureIn(BaseModel):
    """Atoms as rows of `points` with one weight each."""

    points: list[list[float]]
    weights: list[float]

    @field_validator("weights")
    @classmethod
    def weights_finite(cls, v: list[float]) -> list[float]:
        if not all(math.isfinite(w) for w in v):
            raise ValueError("weights must be finite")
        return v

    @model_validator(mode="after")
    def shapes_agree(self) -> SignedMeasureIn:
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights must have the same length")
        if len({len(p) for p in self.points}) > 1:
            raise ValueError("all points must have the same dimension")
        return self


class MeasureIn(SignedMeasureIn):
    @field_validator("weights")
    @classmethod
    def weights_nonnegative(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("a measure needs at least one atom")
        if any(w < 0 for w in v):
            raise ValueError("weights must be nonnegative")
        return v


class WassersteinRequest(BaseModel):
    first: MeasureIn
    second: MeasureIn
    ell: float = Field(ge=0)
    include_plan: bool = False


class Wasserstein0Request(BaseModel):
    first: MeasureIn
    second: MeasureIn


class PlanEntry(BaseModel):
    row: int
    col: int
    mass: float


class WassersteinResponse(BaseModel):
    ell: float
    distance: float
    cost: float
    plan: Optional[list[PlanEntry]] = None

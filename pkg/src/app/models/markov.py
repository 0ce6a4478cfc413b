"""Markov model and Poisson-equation API schemas."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class MarkovModelIn(BaseModel):
    states: list[list[float]]
    kernel: list[list[float]]

    @model_validator(mode="after")
    def square_kernel(self) -> MarkovModelIn:
        k = len(self.states)
        if k == 0:
            raise ValueError("a model needs at least one state")
        if len(self.kernel) != k or any(len(row) != k for row in self.kernel):
            raise ValueError("kernel must be k×k for k states")
        return self


class PoissonRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: Optional[MarkovModelIn] = None
    model_path: Optional[str] = None
    observable: str
    tol: float = Field(default=1e-12, gt=0)

    @model_validator(mode="after")
    def one_model_source(self) -> PoissonRequest:
        if (self.model is None) == (self.model_path is None):
            raise ValueError("give exactly one of model or model_path")
        return self


class PoissonResponse(BaseModel):
    observable: str
    states: list[list[float]]
    invariant: list[float]
    f: list[float]
    F: list[float]
    residual: float
    variance: float
    neumann_terms: int
    neumann_variance: float
    solver_gap: float

"""Experiment config and run manifest schemas.

A config is one JSON document with sections `family`, `functional`, `run`
and `output`. Measures and models may be inline or a path to a file in the
text formats, resolved relative to the config file.
"""

from __future__ import annotations

from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.models.markov import MarkovModelIn
from app.models.measure import MeasureIn, SignedMeasureIn

MAX_SEED = 2**64 - 1

MeasureRef = Union[MeasureIn, str]
ModelRef = Union[MarkovModelIn, str]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())


class IIDSpec(_Strict):
    kind: Literal["iid"]
    mu: MeasureRef


class CyclicSpec(_Strict):
    kind: Literal["cyclic"]
    thetas: list[MeasureRef] = Field(min_length=1)


class DecayingSpec(_Strict):
    kind: Literal["decaying"]
    mu: MeasureRef
    tau: SignedMeasureIn
    alpha: float = Field(gt=0.5)
    c: float = Field(gt=0)


class SqrtPerturbedSpec(_Strict):
    kind: Literal["sqrt_perturbed"]
    mu: MeasureRef
    tau: SignedMeasureIn


class MarkovSpec(_Strict):
    kind: Literal["markov"]
    model: ModelRef
    nu1: Optional[MeasureRef] = None  # defaults to the invariant law


class AR1Spec(_Strict):
    kind: Literal["ar1"]
    a: float = Field(gt=-1, lt=1)
    noise_sd: float = Field(gt=0)


FamilySpec = Annotated[
    Union[IIDSpec, CyclicSpec, DecayingSpec, SqrtPerturbedSpec, MarkovSpec, AR1Spec],
    Field(discriminator="kind"),
]


class RunSection(_Strict):
    N: int = Field(ge=10)
    M: int = Field(ge=100)
    master_seed: int = Field(ge=0, le=MAX_SEED)
    ell: Optional[float] = Field(default=None, ge=0)
    decomposition_trace: bool = False
    N_grid: list[int] = []

    @field_validator("N_grid")
    @classmethod
    def grid_increasing(cls, v: list[int]) -> list[int]:
        if any(n < 10 for n in v):
            raise ValueError("N_grid entries must be at least 10")
        if v != sorted(set(v)):
            raise ValueError("N_grid must be strictly increasing")
        return v


class OutputSection(_Strict):
    samples: str = "samples.csv"
    report: str = "report.json"
    manifest: str = "manifest.json"


class ExperimentConfig(_Strict):
    family: FamilySpec
    functional: str
    run: RunSection
    output: OutputSection = OutputSection()


class RunManifest(BaseModel):
    config_digest: str
    tool_version: str
    master_seed: str
    outputs: dict[str, str]
    duration_seconds: float

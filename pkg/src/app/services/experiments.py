"""Config-driven CLT experiments: validate, build, run, write artifacts, record."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import ConfigError, ParseError
from app.db.schema import ExperimentRun
from app.models.experiment import (
    AR1Spec,
    CyclicSpec,
    DecayingSpec,
    ExperimentConfig,
    IIDSpec,
    MarkovSpec,
    MeasureRef,
    RunManifest,
    SqrtPerturbedSpec,
)
from app.models.markov import MarkovModelIn
from app.services import formats
from app.services.clt_harness import CltExperiment, CltReport, run_experiment
from app.services.distances import measure_from_schema, signed_from_schema
from app.services.functionals import get_functional
from app.services.markov import MarkovModel
from app.services.measures import DiscreteMeasure
from app.services.runs import RunService
from app.services.sequences import (
    AR1Family,
    CyclicFamily,
    DecayingFamily,
    IIDFamily,
    MarkovFamily,
    SequenceFamily,
    SqrtPerturbedFamily,
)

logger = logging.getLogger(__name__)


def resolve_threads(flag: Optional[int]) -> int:
    """--threads, then FUNCTIONAL_CLT_THREADS, then the CPU count; 0 means auto."""
    requested = flag if flag is not None else settings.functional_clt_threads
    if requested < 0:
        raise ConfigError("thread count must be nonnegative")
    return requested or (os.cpu_count() or 1)


def parse_config(document: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"invalid config at {where}: {first['msg']}") from None


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", exc.lineno) from None
    if not isinstance(document, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(document)


@dataclass(frozen=True)
class RunOutcome:
    report: CltReport
    manifest: RunManifest
    output_dir: Path
    record: Optional[ExperimentRun] = None


class ExperimentService:
    def __init__(self, run_service: Optional[RunService] = None, base_dir: str | Path = ".") -> None:
        self._run_service = run_service
        self._base_dir = Path(base_dir)

    def _measure(self, ref: MeasureRef) -> DiscreteMeasure:
        if isinstance(ref, str):
            return formats.read_measure(self._base_dir / ref)
        return measure_from_schema(ref)

    def _model(self, ref: MarkovModelIn | str) -> MarkovModel:
        if isinstance(ref, str):
            return formats.read_model(self._base_dir / ref)
        return MarkovModel.from_kernel(ref.states, ref.kernel)

    def build_family(self, spec, ell: float) -> SequenceFamily:
        if isinstance(spec, IIDSpec):
            return IIDFamily(self._measure(spec.mu), ell)
        if isinstance(spec, CyclicSpec):
            return CyclicFamily([self._measure(t) for t in spec.thetas], ell)
        if isinstance(spec, DecayingSpec):
            mu = self._measure(spec.mu)
            return DecayingFamily(mu, signed_from_schema(spec.tau, mu.dim), spec.alpha, spec.c, ell)
        if isinstance(spec, SqrtPerturbedSpec):
            mu = self._measure(spec.mu)
            return SqrtPerturbedFamily(mu, signed_from_schema(spec.tau, mu.dim), ell)
        if isinstance(spec, MarkovSpec):
            model = self._model(spec.model)
            nu1 = model.mu if spec.nu1 is None else self._measure(spec.nu1)
            return MarkovFamily(model, nu1, ell)
        if isinstance(spec, AR1Spec):
            return AR1Family(spec.a, spec.noise_sd, ell)
        raise ConfigError(f"unknown family kind: {spec!r}")

    def build(self, config: ExperimentConfig) -> CltExperiment:
        U = get_functional(config.functional)
        ell = U.certificate.ell
        if config.run.ell is not None and config.run.ell != ell:
            raise ConfigError(f"run.ell={config.run.ell} but {U.id} is certified for ell={ell}")
        family = self.build_family(config.family, ell)
        return CltExperiment(
            family=family,
            functional=U,
            n=config.run.N,
            m=config.run.M,
            master_seed=config.run.master_seed,
            decomposition_trace=config.run.decomposition_trace,
            n_grid=tuple(config.run.N_grid),
        )

    def run(
        self,
        config: ExperimentConfig,
        out_dir: str | Path,
        threads: Optional[int] = None,
        record: bool = False,
    ) -> RunOutcome:
        started = time.perf_counter()
        document = config.model_dump(mode="json")
        digest = formats.config_digest(document)
        experiment = self.build(config)
        workers = resolve_threads(threads)
        logger.info("Experiment %s started (seed=%d)", digest[:12], config.run.master_seed)

        report = run_experiment(experiment, workers)

        out = Path(out_dir)
        outputs = {
            "samples": str(out / config.output.samples),
            "report": str(out / config.output.report),
            "manifest": str(out / config.output.manifest),
        }
        formats.write_text(Path(outputs["samples"]), formats.dumps_samples(report.samples))
        formats.write_text(Path(outputs["report"]), formats.dumps_report(report.to_dict()))
        manifest = RunManifest(
            config_digest=digest,
            tool_version=settings.app_version,
            master_seed=str(config.run.master_seed),
            outputs=outputs,
            duration_seconds=time.perf_counter() - started,
        )
        formats.write_text(
            Path(outputs["manifest"]), formats.dumps_report(manifest.model_dump(mode="json"))
        )
        logger.info("Experiment %s finished in %.2fs", digest[:12], manifest.duration_seconds)

        row = None
        if record:
            if self._run_service is None:
                raise ConfigError("recording needs a database session")
            row = self._run_service.record_run(manifest, report, str(out))
        return RunOutcome(report, manifest, out, row)

    def run_recorded(self, config: ExperimentConfig) -> RunOutcome:
        """Run under `settings.output_dir/<digest prefix>` and store the run."""
        digest = formats.config_digest(config.model_dump(mode="json"))
        return self.run(config, Path(settings.output_dir) / digest[:12], record=True)


def with_overrides(
    config: ExperimentConfig, seed: Optional[int] = None, ell: Optional[float] = None
) -> ExperimentConfig:
    """Apply `--seed` / `--ell` before the digest is taken."""
    updates = {}
    if seed is not None:
        updates["master_seed"] = seed
    if ell is not None:
        updates["ell"] = ell
    if not updates:
        return config
    run = {**config.run.model_dump(mode="json"), **updates}
    return parse_config({**config.model_dump(mode="json"), "run": run})

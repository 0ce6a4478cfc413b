import json
import logging
import uuid

from fastapi import HTTPException

from app.db.schema import ExperimentRun
from app.models.experiment import RunManifest
from app.services.base import BaseService
from app.services.clt_harness import CltReport
from app.services.formats import dumps_report

logger = logging.getLogger(__name__)


class RunService(BaseService):
    def list_runs(self) -> list[ExperimentRun]:
        return list(
            self.session.query(ExperimentRun)
            .order_by(ExperimentRun.created_at.desc())
            .all()
        )

    def get_run(self, run_id: uuid.UUID) -> ExperimentRun:
        run = self.session.query(ExperimentRun).filter(ExperimentRun.id == run_id).first()
        if not run:
            raise HTTPException(status_code=404, detail="Run not found")
        return run

    def record_run(self, manifest: RunManifest, report: CltReport, output_dir: str) -> ExperimentRun:
        run = ExperimentRun(
            config_digest=manifest.config_digest,
            tool_version=manifest.tool_version,
            master_seed=manifest.master_seed,
            functional_id=report.functional_id,
            family_kind=report.family_kind,
            n=report.n,
            m=report.m,
            output_dir=output_dir,
            duration_seconds=manifest.duration_seconds,
            predicted_mean=report.predicted.mean,
            predicted_variance=report.predicted.variance,
            empirical_mean=report.empirical_mean,
            empirical_variance=report.empirical_variance,
            ks_statistic=report.ks_statistic,
            ks_pvalue=report.ks_pvalue,
            degenerate=report.degenerate,
            report_json=dumps_report(report.to_dict()),
        )
        run = self.save(run)
        logger.info("Recorded run %s (digest %s)", run.id, manifest.config_digest[:12])
        return run

    @staticmethod
    def report_of(run: ExperimentRun) -> dict:
        return json.loads(run.report_json)

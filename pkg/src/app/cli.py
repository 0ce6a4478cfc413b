"""Command-line front end.

Exit codes: 0 ok, 2 input error, 3 resource limit, 4 mathematical
precondition failure.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

from app.core.config import settings
from app.core.errors import LabError
from app.core.log import configure_logging
from app.services import formats
from app.services.experiments import ExperimentService, load_config, with_overrides
from app.services.poisson import PoissonService
from app.services.transport import wasserstein, wasserstein0_plan


def cmd_wasserstein(args: argparse.Namespace) -> int:
    m1 = formats.read_measure(args.file1)
    m2 = formats.read_measure(args.file2)
    if args.ell == 0:
        plan = wasserstein0_plan(m1, m2)
        distance = plan.cost
    else:
        distance, plan = wasserstein(m1, m2, args.ell)
    print(format(distance, ".12g"))
    if args.plan:
        sys.stdout.write(formats.dumps_plan(plan))
    return 0


def cmd_clt_run(args: argparse.Namespace) -> int:
    config = with_overrides(load_config(args.config), seed=args.seed, ell=args.ell)
    base_dir = Path(args.config).resolve().parent
    if args.record:
        from app.db.session import SessionLocal
        from app.services.runs import RunService

        with SessionLocal() as session:
            outcome = ExperimentService(RunService(session), base_dir).run(
                config, args.out, threads=args.threads, record=True
            )
    else:
        outcome = ExperimentService(base_dir=base_dir).run(config, args.out, threads=args.threads)
    report = outcome.report
    print(f"predicted  mean={report.predicted.mean:.6g} variance={report.predicted.variance:.6g}")
    print(f"empirical  mean={report.empirical_mean:.6g} variance={report.empirical_variance:.6g}")
    if report.degenerate:
        print("ks         skipped (degenerate prediction)")
    else:
        print(f"ks         D={report.ks_statistic:.6g} p={report.ks_pvalue:.6g}")
    corrected = report.extras.get("ks_drift_corrected")
    if corrected is not None:
        print(
            f"ks+drift   D={corrected['statistic']:.6g} p={corrected['pvalue']:.6g} "
            f"drift={report.extras['drift']:.6g}"
        )
    if report.decomposition is not None:
        for n, median in zip(report.decomposition.grid, report.decomposition.medians):
            print(f"remainder  N={n} median|sqrt(N) R_N|={median:.6g}")
        if report.decomposition.slope is not None:
            print(f"remainder  slope={report.decomposition.slope:.4f}")
    print(f"digest     {outcome.manifest.config_digest}")
    for name, path in outcome.manifest.outputs.items():
        print(f"{name:<10} {path}")
    return 0


def cmd_poisson(args: argparse.Namespace) -> int:
    model = formats.read_model(args.model)
    tol = settings.default_tol if args.tol is None else args.tol
    report = PoissonService().solve(model, args.observable, tol)
    for state, value in zip(model.states, report.direct.F):
        print(" ".join(formats.fmt(c) for c in state), formats.fmt(value))
    print(f"residual {formats.fmt(report.direct.residual)}")
    print(f"variance {formats.fmt(report.direct.variance)}")
    print(f"neumann_terms {report.neumann.terms} solver_gap {formats.fmt(report.solver_gap)}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("app.main:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="functional-clt", description=settings.app_name)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("wasserstein", help="exact W_ell between two measure files")
    p.add_argument("file1")
    p.add_argument("file2")
    p.add_argument("--ell", type=float, required=True, help="moment order; 0 selects W_0")
    p.add_argument("--plan", action="store_true", help="also dump the optimal plan")
    p.set_defaults(handler=cmd_wasserstein)

    p = sub.add_parser("clt-run", help="run a CLT experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="overrides run.master_seed")
    p.add_argument("--threads", type=int, help="0 = auto; falls back to FUNCTIONAL_CLT_THREADS")
    p.add_argument("--ell", type=float, help="must match the functional's certificate")
    p.add_argument("--record", action="store_true", help="store the run in the database")
    p.set_defaults(handler=cmd_clt_run)

    p = sub.add_parser("poisson", help="solve the Poisson equation on a model file")
    p.add_argument("model")
    p.add_argument("observable", help="catalog functional id, e.g. linear:identity")
    p.add_argument("--tol", type=float)
    p.set_defaults(handler=cmd_poisson)

    p = sub.add_parser("serve", help="start the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging("DEBUG" if args.verbose else settings.log_level)
    try:
        return args.handler(args)
    except LabError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

"""FastAPI service wrapping the solver package.

Error mapping: infeasible scenarios return 409 with a cut witness,
semantic configuration problems 400, schema violations the framework's
default 422. Non-convergence is not an error; it is reported in the
response status field.
"""

from __future__ import annotations

from dataclasses import asdict

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..network import InfeasibleNetworkError
from ..runner import (
    audit_scenario,
    compare_scenario,
    dp_solve_scenario,
    solve_scenario,
    sweep_scenario,
)
from ..scenario import (
    ConfigError,
    Scenario,
    build_domain_network,
    generate_paper_scenario,
)
from . import schemas


def _trace_table(trace) -> schemas.TraceTable:
    return schemas.TraceTable(
        social_utility=list(trace.social_utility),
        primal_residual=list(trace.primal_residual),
        dual_residual=list(trace.dual_residual),
    )


def create_app() -> FastAPI:
    app = FastAPI(title="dpot solver service", version=__version__)

    @app.exception_handler(InfeasibleNetworkError)
    async def _infeasible(request: Request, exc: InfeasibleNetworkError):
        detail = schemas.ErrorDetail(
            code="infeasible", message=str(exc), witness=str(exc.witness)
        )
        return JSONResponse(status_code=409, content={"detail": detail.model_dump()})

    @app.exception_handler(ConfigError)
    async def _config(request: Request, exc: ConfigError):
        detail = schemas.ErrorDetail(code="config", message=str(exc))
        return JSONResponse(status_code=400, content={"detail": detail.model_dump()})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/scenario/generate", response_model=Scenario)
    def scenario_generate(req: schemas.GenerateScenarioRequest) -> Scenario:
        return generate_paper_scenario(
            req.seed, beta=req.beta, iterations=req.iterations
        )

    @app.post("/solve", response_model=schemas.SolveResponse)
    def solve(req: schemas.SolveRequest) -> schemas.SolveResponse:
        outcome = solve_scenario(req.scenario)
        net = build_domain_network(req.scenario)
        return schemas.SolveResponse(
            status=outcome.status,
            objective=outcome.objective,
            iterations=outcome.iterations,
            plan=[float(x) for x in outcome.plan],
            edges=[(e.target, e.source) for e in net.edges],
            trace=_trace_table(outcome.trace),
        )

    @app.post("/dp-solve", response_model=schemas.DpSolveResponse)
    def dp_solve(req: schemas.DpSolveRequest) -> schemas.DpSolveResponse:
        outcome = dp_solve_scenario(
            req.scenario, beta=req.beta, iterations=req.iterations, seed=req.seed
        )
        net = build_domain_network(req.scenario)
        r = outcome.result
        return schemas.DpSolveResponse(
            beta=outcome.beta_label,
            iterations=outcome.iterations,
            seed=outcome.seed,
            summary_plan=[float(x) for x in r.summary_plan],
            edges=[(e.target, e.source) for e in net.edges],
            summary_utility=r.summary_utility,
            tail_mean_utility=r.tail_mean_utility,
            tail_std=r.tail_std,
            tail_len=r.tail_len,
            trace=_trace_table(r.trace),
        )

    @app.post("/sweep", response_model=schemas.SweepResponse)
    def sweep(req: schemas.SweepRequest) -> schemas.SweepResponse:
        rows = sweep_scenario(req.scenario, req.beta_grid, req.seeds)
        return schemas.SweepResponse(
            rows=[schemas.SweepRowModel(**asdict(row)) for row in rows]
        )

    @app.post("/compare", response_model=schemas.CompareResponse)
    def compare(req: schemas.CompareRequest) -> schemas.CompareResponse:
        report = compare_scenario(req.scenario, beta=req.beta, seed=req.seed)
        rows = [
            schemas.CompareRowModel(
                target=t, oracle_total=o, admm_total=a, dp_total=d
            )
            for t, o, a, d in zip(
                report.targets,
                report.oracle_totals,
                report.admm_totals,
                report.dp_totals,
            )
        ]
        return schemas.CompareResponse(
            rows=rows,
            oracle_objective=report.oracle_objective,
            admm_objective=report.admm_objective,
            dp_summary_objective=report.dp_summary_objective,
            admm_status=report.admm_status,
        )

    @app.post("/audit", response_model=schemas.AuditResponse)
    def audit(req: schemas.AuditRequest) -> schemas.AuditResponse:
        report = audit_scenario(req.scenario, trials=req.trials, seed=req.seed)
        return schemas.AuditResponse(**asdict(report))

    return app


app = create_app()

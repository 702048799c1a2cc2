"""Request and response models for the solver service."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from ..scenario import Scenario


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TraceTable(_Model):
    """Column-oriented per-iteration diagnostics."""

    social_utility: list[float]
    primal_residual: list[float]
    dual_residual: list[float]


class GenerateScenarioRequest(_Model):
    seed: int = 0
    beta: float = 1000.0
    iterations: int = 1000


class SolveRequest(_Model):
    scenario: Scenario


class SolveResponse(_Model):
    status: str
    objective: float
    iterations: int
    plan: list[float]
    edges: list[tuple[int, int]]
    trace: TraceTable


class DpSolveRequest(_Model):
    scenario: Scenario
    beta: float | None = None
    iterations: int | None = None
    seed: int | None = None


class DpSolveResponse(_Model):
    beta: str
    iterations: int
    seed: int
    summary_plan: list[float]
    edges: list[tuple[int, int]]
    summary_utility: float
    tail_mean_utility: float
    tail_std: float
    tail_len: int
    trace: TraceTable


class SweepRequest(_Model):
    scenario: Scenario
    beta_grid: list[float] = Field(min_length=1)
    seeds: list[int] = Field(min_length=1)


class SweepRowModel(_Model):
    beta: float
    seed: int
    dp_utility: float | None
    nonprivate_utility: float | None
    oracle_utility: float | None
    tail_std: float | None
    error: str = ""


class SweepResponse(_Model):
    rows: list[SweepRowModel]


class CompareRequest(_Model):
    scenario: Scenario
    beta: float | None = None
    seed: int | None = None


class CompareRowModel(_Model):
    target: int
    oracle_total: float
    admm_total: float
    dp_total: float


class CompareResponse(_Model):
    rows: list[CompareRowModel]
    oracle_objective: float
    admm_objective: float
    dp_summary_objective: float
    admm_status: str


class AuditRequest(_Model):
    scenario: Scenario
    trials: int = 200
    seed: int | None = None


class AuditResponse(_Model):
    rho: float
    eta: float
    beta: float
    slope_bound_ok: bool
    slope_violations: int
    max_slope: float
    sensitivity_config_rho: float
    sensitivity_config_max: float
    sensitivity_config_bound: float
    sensitivity_config_ok: bool
    sensitivity_max_slope_rho: float
    sensitivity_max_slope_max: float
    sensitivity_max_slope_bound: float
    sensitivity_max_slope_ok: bool
    ratio_calibrated_log: float
    ratio_calibrated_ok: bool
    ratio_inverted_log: float
    ratio_inverted_ok: bool


class ErrorDetail(_Model):
    code: str
    message: str
    witness: str | None = None

"""End-to-end run orchestration shared by the service and the CLI client.

Feasibility is checked once when a scenario is materialized; downstream
solvers may assume it. Failures keep their class: infeasible scenarios
raise `InfeasibleNetworkError` with a witness, semantic configuration
problems raise `ConfigError`, and non-convergence is a result status, not
an exception.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import RunTrace, run
from .network import InfeasibleNetworkError, Network, check_feasibility, source_node, target_node
from .privacy import (
    DpRunResult,
    density_ratio_check_1d,
    dp_run,
    sensitivity_audit,
    xi_from_beta,
)
from .reference import solve_centralized_linear
from .scenario import (
    ConfigError,
    Scenario,
    build_domain_network,
    build_domain_table,
    build_privacy,
    build_solve_options,
)
from .utility import UtilityTable, check_slope_bound


@dataclass
class Materialized:
    net: Network
    table: UtilityTable


def materialize(sc: Scenario) -> Materialized:
    """Build and validate the domain objects; feasibility checked here once."""
    net = build_domain_network(sc)
    table = build_domain_table(sc, net)
    feas = check_feasibility(net)
    if not feas.feasible:
        raise InfeasibleNetworkError(feas.witness)
    return Materialized(net=net, table=table)


@dataclass
class SolveOutcome:
    status: str
    objective: float
    iterations: int
    plan: np.ndarray
    trace: RunTrace


def solve_scenario(sc: Scenario) -> SolveOutcome:
    m = materialize(sc)
    result = run(m.net, m.table, build_solve_options(sc))
    return SolveOutcome(
        status=result.status,
        objective=result.objective,
        iterations=result.iterations,
        plan=result.plan,
        trace=result.trace,
    )


@dataclass
class DpOutcome:
    beta_label: str
    iterations: int
    seed: int
    result: DpRunResult


def dp_solve_scenario(
    sc: Scenario,
    beta: float | None = None,
    iterations: int | None = None,
    seed: int | None = None,
) -> DpOutcome:
    m = materialize(sc)
    privacy = build_privacy(sc, beta=beta, iterations=iterations)
    run_seed = sc.privacy.seed if seed is None else seed
    result = dp_run(m.net, m.table, privacy, seed=run_seed)
    label = repr(float(beta)) if beta is not None else _beta_label(sc.privacy.beta)
    return DpOutcome(
        beta_label=label, iterations=privacy.iterations, seed=run_seed, result=result
    )


def _beta_label(beta) -> str:
    if isinstance(beta, (int, float)):
        return repr(float(beta))
    return "per-node"


def oracle_objective(m: Materialized) -> float | None:
    """Centralized optimum; None when the instance is not all-linear."""
    if not m.table.all_linear:
        return None
    return solve_centralized_linear(m.net, m.table).objective


@dataclass
class SweepRow:
    beta: float
    seed: int
    dp_utility: float | None
    nonprivate_utility: float | None
    oracle_utility: float | None
    tail_std: float | None
    error: str = ""


def sweep_scenario(
    sc: Scenario, beta_grid: list[float], seeds: list[int]
) -> list[SweepRow]:
    """Full (beta, seed) cross product; per-cell failures are recorded in
    their row and the sweep continues."""
    if not beta_grid:
        raise ConfigError("beta grid must not be empty")
    if not seeds:
        raise ConfigError("seed list must not be empty")
    m = materialize(sc)
    privacy_iters = sc.privacy.iterations
    base = run(m.net, m.table, build_solve_options(sc))
    nonprivate = base.objective
    oracle = oracle_objective(m)
    rows: list[SweepRow] = []
    for beta in beta_grid:
        for seed in seeds:
            try:
                privacy = build_privacy(sc, beta=beta, iterations=privacy_iters)
                result = dp_run(m.net, m.table, privacy, seed=seed)
                rows.append(
                    SweepRow(
                        beta=beta, seed=seed,
                        dp_utility=result.summary_utility,
                        nonprivate_utility=nonprivate,
                        oracle_utility=oracle,
                        tail_std=result.tail_std,
                    )
                )
            except (ConfigError, ValueError) as exc:
                rows.append(
                    SweepRow(
                        beta=beta, seed=seed, dp_utility=None,
                        nonprivate_utility=None, oracle_utility=None,
                        tail_std=None, error=str(exc) or exc.__class__.__name__,
                    )
                )
    return rows


@dataclass
class CompareReport:
    """Per-target received amounts under the three solution routes."""

    targets: list[int]
    oracle_totals: list[float]
    admm_totals: list[float]
    dp_totals: list[float]
    oracle_objective: float
    admm_objective: float
    dp_summary_objective: float
    admm_status: str


def compare_scenario(
    sc: Scenario, beta: float | None = None, seed: int | None = None
) -> CompareReport:
    m = materialize(sc)
    if not m.table.all_linear:
        raise ConfigError("compare requires linear utilities (flow oracle)")
    oracle = solve_centralized_linear(m.net, m.table)
    admm = run(m.net, m.table, build_solve_options(sc))
    dp = dp_solve_scenario(sc, beta=beta, seed=seed)

    def totals(plan) -> list[float]:
        return [
            float(sum(plan[pos] for pos in m.net.target_edges[i]))
            for i in range(m.net.n_targets)
        ]

    return CompareReport(
        targets=list(range(m.net.n_targets)),
        oracle_totals=totals(oracle.plan),
        admm_totals=totals(admm.plan),
        dp_totals=totals(dp.result.summary_plan),
        oracle_objective=oracle.objective,
        admm_objective=admm.objective,
        dp_summary_objective=dp.result.summary_utility,
        admm_status=admm.status,
    )


@dataclass
class AuditReport:
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


def audit_scenario(sc: Scenario, trials: int = 200, seed: int | None = None) -> AuditReport:
    """Slope-bound check, sensitivity audits, and the 1-D density certificate.

    The sensitivity audit runs twice: once with the configured gradient
    bound and once with the largest actual slope, which covers the case
    where the configuration pairs a small rho with larger slopes. The
    density certificate is evaluated for the calibrated noise rate
    (eta/rho)*beta and for the inverted rate (rho/eta)*beta; the latter
    fails whenever rho > eta.
    """
    m = materialize(sc)
    pm = sc.privacy
    if not isinstance(pm.beta, (int, float)):
        raise ConfigError("audit needs a scalar beta")
    beta = float(pm.beta)
    rng = np.random.default_rng(sc.privacy.seed if seed is None else seed)

    slope_report = check_slope_bound(m.table, pm.rho, m.net)
    max_slope = max(
        max(s.gain for s in m.table.target), max(s.gain for s in m.table.source)
    )

    # audit the widest target and widest source node with both gradient bounds
    widest_target = max(range(m.net.n_targets), key=lambda i: len(m.net.target_edges[i]))
    widest_source = max(range(m.net.n_sources), key=lambda j: len(m.net.source_edges[j]))
    nodes = (target_node(widest_target), source_node(widest_source))

    def run_audit(rho: float):
        per_node = max(1, trials // len(nodes))
        results = [
            sensitivity_audit(m.net, m.table, node, per_node, rng, rho=rho, eta=pm.eta)
            for node in nodes
        ]
        worst = max(r.max_change for r in results)
        bound = rho / pm.eta
        return worst, bound, worst <= bound + 1e-9

    cfg_worst, cfg_bound, cfg_ok = run_audit(pm.rho)
    slope_rho = max(max_slope, pm.rho)
    slope_worst, slope_bound, slope_ok = run_audit(slope_rho)

    s = pm.rho / pm.eta
    calibrated = density_ratio_check_1d(xi_from_beta(pm.rho, pm.eta, beta), s, beta)
    inverted = density_ratio_check_1d((pm.rho / pm.eta) * beta, s, beta)

    return AuditReport(
        rho=pm.rho,
        eta=pm.eta,
        beta=beta,
        slope_bound_ok=slope_report.ok,
        slope_violations=len(slope_report.violations),
        max_slope=max_slope,
        sensitivity_config_rho=pm.rho,
        sensitivity_config_max=cfg_worst,
        sensitivity_config_bound=cfg_bound,
        sensitivity_config_ok=cfg_ok,
        sensitivity_max_slope_rho=slope_rho,
        sensitivity_max_slope_max=slope_worst,
        sensitivity_max_slope_bound=slope_bound,
        sensitivity_max_slope_ok=slope_ok,
        ratio_calibrated_log=calibrated.log_worst_ratio,
        ratio_calibrated_ok=calibrated.holds,
        ratio_inverted_log=inverted.log_worst_ratio,
        ratio_inverted_ok=inverted.holds,
    )

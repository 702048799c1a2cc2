"""Round-based consensus iteration over the transport network.

Two steppers are provided. The short form is the production path: one dual
variable per edge, consensus as the plain average of the two proposals. The
long form keeps separate target/source duals and a closed-form consensus
minimization; it exists to verify that the two formulations produce the same
trajectory, and for Lagrangian diagnostics.

Both dual updates use linear residuals. Within a round all node subproblems
read the previous round's consensus and duals (Jacobi order), so they may be
evaluated in any order or concurrently without changing the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .local_solver import _project_with_shift, _solve_curved
from .network import InfeasibleNetworkError, Network, check_feasibility
from .utility import UtilityTable, _value

RunStatus = Literal["converged", "max_iters"]


@dataclass
class SolveOptions:
    eta: float = 1.0
    max_iters: int = 5000
    primal_tol: float = 1e-6
    dual_tol: float = 1e-6
    record_trace: bool = False

    def __post_init__(self) -> None:
        if not (self.eta > 0) or not math.isfinite(self.eta):
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.primal_tol < 0 or self.dual_tol < 0:
            raise ValueError("tolerances must be nonnegative")


@dataclass
class TransportState:
    """One round's iterate: proposals, consensus, and duals.

    The short form uses `alpha` only; the long form additionally carries
    `alpha_t` and `alpha_s`.
    """

    pi_t: np.ndarray
    pi_s: np.ndarray
    pi: np.ndarray
    alpha: np.ndarray
    alpha_t: np.ndarray | None = None
    alpha_s: np.ndarray | None = None
    k: int = 0

    @classmethod
    def zeros(cls, n_edges: int, long_form: bool = False) -> "TransportState":
        state = cls(
            pi_t=np.zeros(n_edges), pi_s=np.zeros(n_edges),
            pi=np.zeros(n_edges), alpha=np.zeros(n_edges),
        )
        if long_form:
            state.alpha_t = np.zeros(n_edges)
            state.alpha_s = np.zeros(n_edges)
        return state


@dataclass
class RunTrace:
    """Per-iteration diagnostics; one entry per executed iteration."""

    social_utility: list[float] = field(default_factory=list)
    primal_residual: list[float] = field(default_factory=list)
    dual_residual: list[float] = field(default_factory=list)
    states: list[TransportState] | None = None

    def __len__(self) -> int:
        return len(self.social_utility)


@dataclass
class RunResult:
    plan: np.ndarray
    trace: RunTrace
    status: RunStatus
    iterations: int
    objective: float


@dataclass(frozen=True)
class CompiledProblem:
    """Network + utilities flattened into the arrays the hot loop needs."""

    n_edges: int
    t_gain: np.ndarray
    t_curv: np.ndarray
    s_gain: np.ndarray
    s_curv: np.ndarray
    #: per node: (incident edge positions, lo, hi)
    t_nodes: tuple[tuple[np.ndarray, float, float], ...]
    s_nodes: tuple[tuple[np.ndarray, float, float], ...]


def compile_problem(net: Network, table: UtilityTable) -> CompiledProblem:
    table.validate_against(net)
    t_gain, t_curv, s_gain, s_curv = table.gain_arrays()
    t_nodes = tuple(
        (np.fromiter(net.target_edges[i], dtype=np.intp), lo, hi)
        for i, (lo, hi) in enumerate(net.target_bounds)
    )
    s_nodes = tuple(
        (np.fromiter(net.source_edges[j], dtype=np.intp), lo, hi)
        for j, (lo, hi) in enumerate(net.source_bounds)
    )
    return CompiledProblem(
        n_edges=net.n_edges,
        t_gain=t_gain, t_curv=t_curv, s_gain=s_gain, s_curv=s_curv,
        t_nodes=t_nodes, s_nodes=s_nodes,
    )


def _proposals(
    comp: CompiledProblem,
    pi: np.ndarray,
    alpha_t: np.ndarray,
    alpha_s: np.ndarray,
    eta: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve every node subproblem from round-k consensus and duals."""
    numer_t = comp.t_gain - alpha_t + eta * pi
    numer_s = comp.s_gain + alpha_s + eta * pi
    pi_t = np.empty(comp.n_edges)
    pi_s = np.empty(comp.n_edges)
    for idx, lo, hi in comp.t_nodes:
        pi_t[idx] = _node_plan(numer_t[idx], comp.t_curv[idx], eta, lo, hi)
    for idx, lo, hi in comp.s_nodes:
        pi_s[idx] = _node_plan(numer_s[idx], comp.s_curv[idx], eta, lo, hi)
    return pi_t, pi_s


def _node_plan(numer, curv, eta, lo, hi) -> np.ndarray:
    # mirrors solve_node_arrays with numer precomputed by the caller
    if curv.any():
        return _solve_curved(numer, curv + eta, lo, hi)[0]
    return _project_with_shift(numer / eta, lo, hi)[0]


def social_utility_arrays(comp: CompiledProblem, plan: np.ndarray) -> float:
    """Aggregate utility of a plan using the compiled gain arrays."""
    both_gain = comp.t_gain + comp.s_gain
    value = float(both_gain @ plan)
    if comp.t_curv.any() or comp.s_curv.any():
        value -= 0.5 * float((comp.t_curv + comp.s_curv) @ (plan * plan))
    return value


def social_utility(plan, table: UtilityTable, net: Network | None = None) -> float:
    """Sum of target-side and source-side utilities at a plan.

    Evaluates the utility formulas directly, so perturbed plans with
    negative entries are accepted.
    """
    plan = np.asarray(plan, dtype=float)
    if len(plan) != table.n_edges:
        raise ValueError("plan length does not match utility table")
    if net is not None and len(plan) != net.n_edges:
        raise ValueError("plan length does not match network")
    return sum(
        _value(t, p) + _value(s, p)
        for t, s, p in zip(table.target, table.source, plan)
    )


def step_short(
    state: TransportState, net: Network, table: UtilityTable, opts: SolveOptions
) -> TransportState:
    """One round of the four-step iteration: node solves, averaging
    consensus, and the single-dual update with linear residual."""
    comp = compile_problem(net, table)
    pi_t, pi_s = _proposals(comp, state.pi, state.alpha, state.alpha, opts.eta)
    pi_new = 0.5 * (pi_t + pi_s)
    alpha_new = state.alpha + 0.5 * opts.eta * (pi_t - pi_s)
    return TransportState(
        pi_t=pi_t, pi_s=pi_s, pi=pi_new, alpha=alpha_new, k=state.k + 1
    )


def step_long(
    state: TransportState, net: Network, table: UtilityTable, opts: SolveOptions
) -> TransportState:
    """One round of the five-step iteration with separate per-side duals.

    The consensus step is solved in closed form,
    pi = (pi_t + pi_s)/2 + (alpha_t - alpha_s)/(2 eta), and both dual
    updates use linear residuals.
    """
    if state.alpha_t is None or state.alpha_s is None:
        raise ValueError("long-form step requires alpha_t and alpha_s")
    comp = compile_problem(net, table)
    eta = opts.eta
    pi_t, pi_s = _proposals(comp, state.pi, state.alpha_t, state.alpha_s, eta)
    pi_new = 0.5 * (pi_t + pi_s) + (state.alpha_t - state.alpha_s) / (2.0 * eta)
    alpha_t_new = state.alpha_t + eta * (pi_t - pi_new)
    alpha_s_new = state.alpha_s + eta * (pi_new - pi_s)
    return TransportState(
        pi_t=pi_t, pi_s=pi_s, pi=pi_new,
        alpha=0.5 * (alpha_t_new + alpha_s_new),
        alpha_t=alpha_t_new, alpha_s=alpha_s_new, k=state.k + 1,
    )


def run(
    net: Network,
    table: UtilityTable,
    opts: SolveOptions | None = None,
    initial: TransportState | None = None,
) -> RunResult:
    """Iterate the short-form stepper until both residuals clear tolerance.

    Stops when the proposal disagreement ||pi_t - pi_s||_inf and the
    consensus movement ||pi(k+1) - pi(k)||_inf both fall under their
    tolerances, or at max_iters. Rejects infeasible networks up front.
    """
    opts = opts or SolveOptions()
    feas = check_feasibility(net)
    if not feas.feasible:
        raise InfeasibleNetworkError(feas.witness)
    comp = compile_problem(net, table)
    state = initial or TransportState.zeros(net.n_edges)
    pi = state.pi.copy()
    alpha = state.alpha.copy()
    trace = RunTrace(states=[] if opts.record_trace else None)
    status: RunStatus = "max_iters"
    iterations = 0
    for k in range(opts.max_iters):
        pi_t, pi_s = _proposals(comp, pi, alpha, alpha, opts.eta)
        pi_new = 0.5 * (pi_t + pi_s)
        alpha = alpha + 0.5 * opts.eta * (pi_t - pi_s)
        primal = float(np.max(np.abs(pi_t - pi_s)))
        dual = float(np.max(np.abs(pi_new - pi)))
        pi = pi_new
        iterations = k + 1
        trace.social_utility.append(social_utility_arrays(comp, pi))
        trace.primal_residual.append(primal)
        trace.dual_residual.append(dual)
        if trace.states is not None:
            trace.states.append(
                TransportState(
                    pi_t=pi_t.copy(), pi_s=pi_s.copy(), pi=pi.copy(),
                    alpha=alpha.copy(), k=k + 1,
                )
            )
        if primal <= opts.primal_tol and dual <= opts.dual_tol:
            status = "converged"
            break
    return RunResult(
        plan=pi,
        trace=trace,
        status=status,
        iterations=iterations,
        objective=social_utility_arrays(comp, pi),
    )


def eval_lagrangian(
    state: TransportState, net: Network, table: UtilityTable, eta: float
) -> float:
    """Value of the full augmented Lagrangian at a long-form state.

    Includes both multiplier terms and both quadratic penalty terms; used
    only as a monotonicity diagnostic.
    """
    if state.alpha_t is None or state.alpha_s is None:
        raise ValueError("Lagrangian evaluation requires a long-form state")
    table.validate_against(net)
    util_t = sum(_value(s, z) for s, z in zip(table.target, state.pi_t))
    util_s = sum(_value(s, z) for s, z in zip(table.source, state.pi_s))
    dt = state.pi_t - state.pi
    ds = state.pi - state.pi_s
    return (
        -util_t
        - util_s
        + float(state.alpha_t @ dt)
        + float(state.alpha_s @ ds)
        + 0.5 * eta * float(dt @ dt)
        + 0.5 * eta * float(ds @ ds)
    )

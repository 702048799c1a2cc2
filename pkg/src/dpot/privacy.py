"""Output-variable perturbation and its audits.

Every proposal a node would share is perturbed by a noise vector drawn from
the spherical density proportional to exp(-xi * ||eps||). The radial
marginal of that density is Gamma(d, rate xi), so the sampler draws the
radius from a Gamma and a uniform direction from normalized Gaussians,
which is exact.

The noise rate follows xi = (eta / rho) * beta. That is the calibration
required for the density-ratio bound exp(beta) to hold given the worst-case
solution sensitivity rho/eta; `density_ratio_check_1d` exhibits the
counterexample for the inverted calibration (rho/eta) * beta, which fails
whenever rho > eta. An infinite beta yields zero noise exactly, which makes
the perturbed iteration reproduce the non-private one bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import (
    CompiledProblem,
    RunTrace,
    SolveOptions,
    TransportState,
    _proposals,
    compile_problem,
    social_utility_arrays,
)
from .network import InfeasibleNetworkError, Network, NodeId, check_feasibility
from .utility import UtilitySpec, UtilityTable


def xi_from_beta(rho: float, eta: float, beta: float) -> float:
    """Noise rate for a node's per-iteration privacy parameter.

    beta may be math.inf, which disables the noise exactly.
    """
    if not (rho > 0 and math.isfinite(rho)):
        raise ValueError(f"rho must be positive and finite, got {rho}")
    if not (eta > 0 and math.isfinite(eta)):
        raise ValueError(f"eta must be positive and finite, got {eta}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return (eta / rho) * beta


@dataclass(frozen=True)
class PrivacyConfig:
    """Noise calibration shared by the private runs.

    `beta` is either a single value for every node, one value per node in
    canonical node order (targets then sources), or one schedule per node
    with at least `iterations` entries.
    """

    rho: float
    eta: float
    beta: float | tuple = 1000.0
    iterations: int = 1000

    def __post_init__(self) -> None:
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise ValueError(f"rho must be positive and finite, got {self.rho}")
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be positive and finite, got {self.eta}")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if isinstance(self.beta, Sequence):
            frozen = tuple(
                tuple(float(b) for b in entry) if isinstance(entry, Sequence) else float(entry)
                for entry in self.beta
            )
            object.__setattr__(self, "beta", frozen)
        for value in self._iter_beta_values():
            if not value > 0:
                raise ValueError(f"beta values must be positive, got {value}")

    def _iter_beta_values(self):
        if isinstance(self.beta, tuple):
            for entry in self.beta:
                if isinstance(entry, tuple):
                    yield from entry
                else:
                    yield entry
        else:
            yield self.beta

    def beta_at(self, node_ordinal: int, k: int) -> float:
        if not isinstance(self.beta, tuple):
            return float(self.beta)
        entry = self.beta[node_ordinal]
        if isinstance(entry, tuple):
            return entry[k]
        return entry

    def validate_for(self, net: Network) -> None:
        if not isinstance(self.beta, tuple):
            return
        if len(self.beta) != net.n_nodes:
            raise ValueError(
                f"per-node beta needs {net.n_nodes} entries, got {len(self.beta)}"
            )
        for entry in self.beta:
            if isinstance(entry, tuple) and len(entry) < self.iterations:
                raise ValueError("beta schedule shorter than the iteration count")


@dataclass(frozen=True)
class NoiseDraw:
    vector: np.ndarray
    norm: float
    provenance: str = ""


def sample_noise(dim: int, xi: float, rng: np.random.Generator, provenance: str = "") -> NoiseDraw:
    """Draw from the density proportional to exp(-xi * ||eps||) on R^dim.

    Radius ~ Gamma(shape dim, rate xi); direction uniform on the sphere via
    normalized independent standard normals.
    """
    if dim < 1:
        raise ValueError(f"dimension must be at least 1, got {dim}")
    if not xi > 0:
        raise ValueError(f"xi must be positive, got {xi}")
    radius = float(rng.gamma(dim, 1.0 / xi))
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    return NoiseDraw(vector=radius * direction, norm=radius, provenance=provenance)


def perturb(plan: np.ndarray, draw: NoiseDraw) -> np.ndarray:
    """Elementwise sum; deliberately no clipping or re-projection.

    The noise is added after the constrained solve and the raw sum is what
    gets shared, so perturbed values may be negative or exceed caps.
    """
    if len(plan) != len(draw.vector):
        raise ValueError(
            f"plan has {len(plan)} entries but noise has {len(draw.vector)}"
        )
    return plan + draw.vector


def node_noise_streams(seed: int, net: Network) -> list[np.random.Generator]:
    """Independent per-node generators, targets then sources.

    Both the array engine and the message-passing simulator derive their
    streams from this function, which is what makes their traces identical.
    """
    children = np.random.SeedSequence(seed).spawn(net.n_nodes)
    return [np.random.default_rng(c) for c in children]


@dataclass
class DpRunResult:
    trace: RunTrace
    consensus_history: np.ndarray
    summary_plan: np.ndarray
    summary_utility: float
    tail_mean_utility: float
    tail_std: float
    tail_len: int


def finalize_dp_result(
    comp: CompiledProblem, history: np.ndarray, trace: RunTrace
) -> DpRunResult:
    """Tail statistics shared by dp_run and the simulator.

    The summary plan is the mean consensus over the final 10% of
    iterations; the perturbed trajectory only oscillates around a value, so
    a tail average is the reported point estimate (labeled as such).
    """
    tail_len = max(1, len(history) // 10)
    tail = history[-tail_len:]
    summary_plan = tail.mean(axis=0)
    tail_utils = np.asarray(trace.social_utility[-tail_len:])
    return DpRunResult(
        trace=trace,
        consensus_history=history,
        summary_plan=summary_plan,
        summary_utility=social_utility_arrays(comp, summary_plan),
        tail_mean_utility=float(tail_utils.mean()),
        tail_std=float(tail_utils.std()),
        tail_len=tail_len,
    )


def dp_run(
    net: Network,
    table: UtilityTable,
    privacy: PrivacyConfig,
    opts: SolveOptions | None = None,
    seed: int = 0,
) -> DpRunResult:
    """Run exactly `privacy.iterations` perturbed rounds (no convergence test).

    Per round: all node subproblems from round-k state, per-node noise on
    both proposal sets, averaging consensus and dual update on the perturbed
    values. `opts` contributes trace recording only; if it carries a
    different eta than the privacy config the call is rejected.
    """
    if opts is not None and opts.eta != privacy.eta:
        raise ValueError(
            f"solve eta {opts.eta} disagrees with privacy eta {privacy.eta}"
        )
    record_states = bool(opts.record_trace) if opts is not None else False
    feas = check_feasibility(net)
    if not feas.feasible:
        raise InfeasibleNetworkError(feas.witness)
    privacy.validate_for(net)

    comp = compile_problem(net, table)
    eta = privacy.eta
    streams = node_noise_streams(seed, net)
    n_edges = net.n_edges
    iters = privacy.iterations
    pi = np.zeros(n_edges)
    alpha = np.zeros(n_edges)
    history = np.empty((iters, n_edges))
    trace = RunTrace(states=[] if record_states else None)

    for k in range(iters):
        pi_t, pi_s = _proposals(comp, pi, alpha, alpha, eta)
        pt = pi_t.copy()
        ps = pi_s.copy()
        ordinal = 0
        for i, (idx, _, _) in enumerate(comp.t_nodes):
            xi = xi_from_beta(privacy.rho, eta, privacy.beta_at(ordinal, k))
            draw = sample_noise(len(idx), xi, streams[ordinal], f"target:{i}@{k}")
            pt[idx] += draw.vector
            ordinal += 1
        for j, (idx, _, _) in enumerate(comp.s_nodes):
            xi = xi_from_beta(privacy.rho, eta, privacy.beta_at(ordinal, k))
            draw = sample_noise(len(idx), xi, streams[ordinal], f"source:{j}@{k}")
            ps[idx] += draw.vector
            ordinal += 1
        pi_new = 0.5 * (pt + ps)
        alpha = alpha + 0.5 * eta * (pt - ps)
        primal = float(np.max(np.abs(pt - ps)))
        dual = float(np.max(np.abs(pi_new - pi)))
        pi = pi_new
        history[k] = pi
        trace.social_utility.append(social_utility_arrays(comp, pi))
        trace.primal_residual.append(primal)
        trace.dual_residual.append(dual)
        if trace.states is not None:
            trace.states.append(
                TransportState(
                    pi_t=pt.copy(), pi_s=ps.copy(), pi=pi.copy(),
                    alpha=alpha.copy(), k=k + 1,
                )
            )
    return finalize_dp_result(comp, history, trace)


@dataclass(frozen=True)
class NodeDataset:
    """The private utility parameters held by one node."""

    node: NodeId
    specs: tuple[UtilitySpec, ...]


@dataclass(frozen=True)
class NeighborPair:
    base: NodeDataset
    altered: NodeDataset
    changed_index: int


def hamming_distance(a: NodeDataset, b: NodeDataset) -> int:
    if len(a.specs) != len(b.specs):
        raise ValueError("datasets must have the same length")
    return sum(1 for x, y in zip(a.specs, b.specs) if x != y)


def _with_gain(spec: UtilitySpec, gain: float) -> UtilitySpec:
    if spec.form == "linear":
        return UtilitySpec.linear_form(gain)
    return UtilitySpec.quad_form(gain, spec.b)


def make_neighbor(
    dataset: NodeDataset, index: int, new_value: float, max_change: float | None = None
) -> NeighborPair:
    """Alter exactly one utility parameter; Hamming distance is 1 by construction."""
    if not 0 <= index < len(dataset.specs):
        raise ValueError(f"index {index} out of range")
    old = dataset.specs[index].gain
    if new_value == old:
        raise ValueError("new value equals the original; distance would be 0")
    if max_change is not None and abs(new_value - old) > max_change:
        raise ValueError(
            f"parameter change {abs(new_value - old)} exceeds allowed {max_change}"
        )
    specs = list(dataset.specs)
    specs[index] = _with_gain(specs[index], new_value)
    return NeighborPair(
        base=dataset,
        altered=NodeDataset(node=dataset.node, specs=tuple(specs)),
        changed_index=index,
    )


def node_dataset(net: Network, table: UtilityTable, node: NodeId) -> NodeDataset:
    """A node's private parameter set: its side of every incident utility."""
    incident = net.incident(node)
    side = table.target if node.kind == "target" else table.source
    return NodeDataset(node=node, specs=tuple(side[pos] for pos in incident))


@dataclass(frozen=True)
class SensitivityAuditResult:
    node: NodeId
    trials: int
    max_change: float
    bound: float
    tight_within: float

    @property
    def within_bound(self) -> bool:
        return self.max_change <= self.bound + 1e-9


def sensitivity_audit(
    net: Network,
    table: UtilityTable,
    node: NodeId,
    trials: int,
    rng: np.random.Generator,
    rho: float,
    eta: float,
) -> SensitivityAuditResult:
    """Empirical worst-case solution shift over neighboring datasets.

    Each trial fixes a random round context (consensus, duals), alters one
    parameter of the node's dataset by at most rho, solves the node's
    subproblem under both datasets, and records the Euclidean shift. The
    strong-convexity argument promises max <= rho / eta.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    dataset = node_dataset(net, table, node)
    incident = net.incident(node)
    lo, hi = net.bounds(node)
    sign = -1.0 if node.kind == "target" else 1.0
    deg = len(incident)
    curv = np.array([s.curvature for s in dataset.specs])
    base_gain = np.array([s.gain for s in dataset.specs])
    bound = rho / eta

    from .local_solver import solve_node_arrays

    worst = 0.0
    ctx_hi = max(1.0, hi)
    for _ in range(trials):
        consensus = rng.uniform(0.0, ctx_hi, deg)
        duals = rng.uniform(-2.0 * rho - 1.0, 2.0 * rho + 1.0, deg)
        index = int(rng.integers(deg))
        change = rng.uniform(-rho, rho)
        new_gain = max(0.0, base_gain[index] + change)
        if new_gain == base_gain[index]:
            new_gain = base_gain[index] + 0.5 * rho
        altered_gain = base_gain.copy()
        altered_gain[index] = new_gain

        w, _ = solve_node_arrays(base_gain, curv, duals, sign, consensus, eta, lo, hi)
        w2, _ = solve_node_arrays(altered_gain, curv, duals, sign, consensus, eta, lo, hi)
        worst = max(worst, float(np.linalg.norm(w - w2)))
    return SensitivityAuditResult(
        node=node, trials=trials, max_change=worst, bound=bound,
        tight_within=bound - worst,
    )


@dataclass(frozen=True)
class DensityRatioCheck:
    xi: float
    sensitivity: float
    beta: float
    log_worst_ratio: float
    holds: bool

    @property
    def worst_ratio(self) -> float:
        return math.exp(self.log_worst_ratio) if self.log_worst_ratio < 700 else math.inf


def density_ratio_check_1d(xi: float, sensitivity: float, beta: float) -> DensityRatioCheck:
    """Analytic privacy certificate for scalar outputs.

    For a one-dimensional output the density ratio between neighboring
    datasets is exp(xi * |W - W'|) at worst, so the claimed exp(beta) bound
    holds iff xi * sensitivity <= beta (tiny numerical slack allowed).
    """
    if not xi > 0:
        raise ValueError(f"xi must be positive, got {xi}")
    if sensitivity < 0:
        raise ValueError("sensitivity must be nonnegative")
    log_ratio = xi * sensitivity
    holds = log_ratio <= beta * (1.0 + 1e-12) + 1e-12
    return DensityRatioCheck(
        xi=xi, sensitivity=sensitivity, beta=beta,
        log_worst_ratio=log_ratio, holds=holds,
    )



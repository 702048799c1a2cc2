"""Round-based message passing between autonomous node agents.

This is a distribution-of-computation refactoring of the perturbed array
engine, not a new algorithm: given the same seed vector the trace is
bit-identical to `privacy.dp_run`. Each agent keeps its utility parameters
in a private container that never appears in a message; only perturbed
proposals traverse the network, and a passive tap records every message for
auditing.

Rounds are barrier-synchronized. The per-edge reduction (consensus average
and dual update) is computed redundantly at both endpoints from the same
two messages, so no coordinator is needed and both dual copies stay equal
by construction. The reduction is commutative over its two inputs, which
makes results independent of message delivery order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import RunTrace, TransportState, compile_problem, social_utility_arrays
from .local_solver import _project_with_shift, _solve_curved
from .network import (
    InfeasibleNetworkError,
    Network,
    NodeId,
    check_feasibility,
    source_node,
    target_node,
)
from .privacy import (
    DpRunResult,
    PrivacyConfig,
    finalize_dp_result,
    node_noise_streams,
    perturb,
    sample_noise,
    xi_from_beta,
)
from .utility import UtilityTable


@dataclass(frozen=True)
class RoundMessage:
    sender: NodeId
    edge_index: int
    payload: float
    round_index: int


@dataclass
class TapLog:
    """Everything the passive adversary observed, in delivery order."""

    messages: list[RoundMessage] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.messages)

    def per_round(self, k: int) -> list[RoundMessage]:
        return [m for m in self.messages if m.round_index == k]

    def rows(self) -> list[tuple[int, str, int, float]]:
        return [
            (m.round_index, str(m.sender), m.edge_index, m.payload)
            for m in self.messages
        ]


class NodeAgent:
    """One autonomous node holding its private parameters and local state.

    The private information set lives in `_private_params` and is only read
    inside `propose`; messages carry freshly computed floats.
    """

    def __init__(
        self,
        node: NodeId,
        specs,
        bounds: tuple[float, float],
        incident: tuple[int, ...],
        eta: float,
        rho: float,
        beta_schedule,
        stream: np.random.Generator,
    ):
        self.node = node
        self.incident = incident
        self._private_params = list(specs)
        self._gain = np.array([s.gain for s in specs], dtype=float)
        self._curv = np.array([s.curvature for s in specs], dtype=float)
        self._lo, self._hi = bounds
        self._eta = eta
        self._rho = rho
        self._beta_schedule = beta_schedule
        self._stream = stream
        deg = len(incident)
        self._alpha = np.zeros(deg)
        self._pi = np.zeros(deg)

    def private_objects(self) -> list[object]:
        """Containers and parameter objects the tap audit screens against."""
        objs: list[object] = [self._private_params]
        for spec in self._private_params:
            objs.extend((spec, spec.slope, spec.a, spec.b))
        return objs

    def _beta(self, k: int) -> float:
        entry = self._beta_schedule
        if isinstance(entry, tuple):
            return entry[k]
        return float(entry)

    def propose(self, k: int) -> np.ndarray:
        """Solve the round subproblem and perturb the result for sharing."""
        if self.node.kind == "target":
            numer = self._gain - self._alpha + self._eta * self._pi
        else:
            numer = self._gain + self._alpha + self._eta * self._pi
        if self._curv.any():
            plan = _solve_curved(numer, self._curv + self._eta, self._lo, self._hi)[0]
        else:
            plan = _project_with_shift(numer / self._eta, self._lo, self._hi)[0]
        xi = xi_from_beta(self._rho, self._eta, self._beta(k))
        draw = sample_noise(len(plan), xi, self._stream, f"{self.node}@{k}")
        return perturb(plan, draw)

    def outgoing(self, k: int) -> list[RoundMessage]:
        star = self.propose(k)
        return [
            RoundMessage(sender=self.node, edge_index=pos, payload=star[i], round_index=k)
            for i, pos in enumerate(self.incident)
        ]

    def integrate(self, own: np.ndarray, counterpart: np.ndarray) -> None:
        """Per-edge reduction from the two perturbed proposals.

        `own` and `counterpart` are in incident-edge order; both endpoints
        of an edge run this same arithmetic on the same message pair.
        """
        if self.node.kind == "target":
            m_t, m_s = own, counterpart
        else:
            m_t, m_s = counterpart, own
        self._pi = 0.5 * (m_t + m_s)
        self._alpha = self._alpha + 0.5 * self._eta * (m_t - m_s)


def make_agents(
    net: Network, table: UtilityTable, privacy: PrivacyConfig, seed: int
) -> list[NodeAgent]:
    """One agent per node, canonical order, with the shared stream layout."""
    table.validate_against(net)
    privacy.validate_for(net)
    streams = node_noise_streams(seed, net)
    beta = privacy.beta

    def schedule(ordinal: int):
        if isinstance(beta, tuple):
            return beta[ordinal]
        return beta

    agents: list[NodeAgent] = []
    ordinal = 0
    for i in range(net.n_targets):
        node = target_node(i)
        incident = net.target_edges[i]
        agents.append(
            NodeAgent(
                node=node,
                specs=[table.target[pos] for pos in incident],
                bounds=net.target_bounds[i],
                incident=incident,
                eta=privacy.eta,
                rho=privacy.rho,
                beta_schedule=schedule(ordinal),
                stream=streams[ordinal],
            )
        )
        ordinal += 1
    for j in range(net.n_sources):
        node = source_node(j)
        incident = net.source_edges[j]
        agents.append(
            NodeAgent(
                node=node,
                specs=[table.source[pos] for pos in incident],
                bounds=net.source_bounds[j],
                incident=incident,
                eta=privacy.eta,
                rho=privacy.rho,
                beta_schedule=schedule(ordinal),
                stream=streams[ordinal],
            )
        )
        ordinal += 1
    return agents


@dataclass
class SimulationResult:
    dp: DpRunResult
    tap_log: TapLog | None


def run_rounds(
    net: Network,
    table: UtilityTable,
    agents: list[NodeAgent],
    privacy: PrivacyConfig,
    rounds: int | None = None,
    tap: bool = True,
    delivery_rng: np.random.Generator | None = None,
    record_states: bool = False,
) -> SimulationResult:
    """Execute barrier-synchronized rounds of propose / exchange / reduce.

    `table` is only used for observer-side diagnostics (the utility trace);
    agents compute from their own private copies. `delivery_rng` shuffles
    within-round delivery order; results are independent of it because the
    per-edge reduction is keyed and commutative. The assembled trace equals
    `dp_run`'s for the same seeds.
    """
    feas = check_feasibility(net)
    if not feas.feasible:
        raise InfeasibleNetworkError(feas.witness)
    if len(agents) != net.n_nodes:
        raise ValueError(f"need {net.n_nodes} agents, got {len(agents)}")
    expected = [*(target_node(i) for i in range(net.n_targets)),
                *(source_node(j) for j in range(net.n_sources))]
    for agent, node in zip(agents, expected):
        if agent.node != node:
            raise ValueError(f"agent order mismatch: {agent.node} where {node} expected")

    rounds = privacy.iterations if rounds is None else rounds
    n_edges = net.n_edges
    comp = compile_problem(net, table)
    log = TapLog() if tap else None
    history = np.empty((rounds, n_edges))
    trace = RunTrace(states=[] if record_states else None)
    pi_prev = np.zeros(n_edges)

    for k in range(rounds):
        messages: list[RoundMessage] = []
        for agent in agents:
            messages.extend(agent.outgoing(k))
        if delivery_rng is not None:
            order = delivery_rng.permutation(len(messages))
            messages = [messages[i] for i in order]
        if log is not None:
            log.messages.extend(messages)

        pt = np.empty(n_edges)
        ps = np.empty(n_edges)
        for m in messages:
            if m.sender.kind == "target":
                pt[m.edge_index] = m.payload
            else:
                ps[m.edge_index] = m.payload
        for agent in agents:
            idx = np.fromiter(agent.incident, dtype=np.intp)
            if agent.node.kind == "target":
                agent.integrate(pt[idx], ps[idx])
            else:
                agent.integrate(ps[idx], pt[idx])

        pi_new = 0.5 * (pt + ps)
        primal = float(np.max(np.abs(pt - ps)))
        dual = float(np.max(np.abs(pi_new - pi_prev)))
        history[k] = pi_new
        trace.social_utility.append(social_utility_arrays(comp, pi_new))
        trace.primal_residual.append(primal)
        trace.dual_residual.append(dual)
        if trace.states is not None:
            alpha_full = _assemble_alpha(net, agents)
            trace.states.append(
                TransportState(
                    pi_t=pt.copy(), pi_s=ps.copy(), pi=pi_new.copy(),
                    alpha=alpha_full, k=k + 1,
                )
            )
        pi_prev = pi_new

    return SimulationResult(dp=finalize_dp_result(comp, history, trace), tap_log=log)


def _assemble_alpha(net: Network, agents: list[NodeAgent]) -> np.ndarray:
    """Target-held dual copies in canonical edge order (both copies agree)."""
    alpha = np.empty(net.n_edges)
    for i in range(net.n_targets):
        agent = agents[i]
        for slot, pos in enumerate(agent.incident):
            alpha[pos] = agent._alpha[slot]
    return alpha


@dataclass(frozen=True)
class TapAuditResult:
    clean: bool
    issues: tuple[str, ...]


def audit_tap(
    log: TapLog,
    agents: list[NodeAgent],
    n_edges: int | None = None,
    rounds: int | None = None,
) -> TapAuditResult:
    """Structural screen of everything the adversary saw.

    Checks that payloads are exactly one finite scalar per edge per
    direction per round, and that no payload object is a node's private
    parameter or parameter container. This is a structural check, not an
    information-theoretic one: it catches mis-wired agents that ship raw
    parameters, not statistical inference.
    """
    if n_edges is None:
        n_edges = 1 + max(max(agent.incident) for agent in agents)
    if rounds is None:
        rounds = 1 + max((m.round_index for m in log.messages), default=-1)
    issues: list[str] = []
    private: dict[str, list[object]] = {
        str(agent.node): agent.private_objects() for agent in agents
    }
    seen: dict[tuple[int, int, str], int] = {}
    for m in log.messages:
        if not isinstance(m.payload, float) or not math.isfinite(m.payload):
            issues.append(
                f"round {m.round_index}: payload from {m.sender} is not a finite scalar"
            )
            continue
        key = (m.round_index, m.edge_index, m.sender.kind)
        seen[key] = seen.get(key, 0) + 1
        for obj in private.get(str(m.sender), ()):
            if m.payload is obj:
                issues.append(
                    f"round {m.round_index}: {m.sender} sent a raw private "
                    f"parameter on edge {m.edge_index}"
                )
                break
    for k in range(rounds):
        for pos in range(n_edges):
            for kind in ("target", "source"):
                count = seen.get((k, pos, kind), 0)
                if count != 1:
                    issues.append(
                        f"round {k}: expected 1 {kind} message on edge {pos}, saw {count}"
                    )
    return TapAuditResult(clean=not issues, issues=tuple(issues))


def write_tap_log(log: TapLog, path) -> None:
    """Dump the tap to delimited text (round, sender, edge, payload)."""
    with open(path, "w") as fh:
        fh.write("round,sender,edge,payload\n")
        for row in log.rows():
            fh.write(f"{row[0]},{row[1]},{row[2]},{row[3]!r}\n")

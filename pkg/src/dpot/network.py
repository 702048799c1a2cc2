"""Bipartite transport network: node bounds, edge indexing, feasibility check.

The edge list order given at construction is the canonical order; every
per-edge vector in the package (plans, duals, noise) uses it.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterator, Literal

NodeKind = Literal["target", "source"]

#: relative slack for treating float capacities as saturated
_FLOW_EPS = 1e-9


class NetworkError(ValueError):
    """A network description is structurally invalid."""


class InfeasibleNetworkError(RuntimeError):
    """No transport plan satisfies the interval bounds."""

    def __init__(self, witness: "InfeasibilityWitness"):
        super().__init__(f"network is infeasible: {witness}")
        self.witness = witness


@dataclass(frozen=True)
class NodeId:
    kind: NodeKind
    index: int

    def __str__(self) -> str:
        return f"{self.kind}:{self.index}"


def target_node(index: int) -> NodeId:
    return NodeId("target", index)


def source_node(index: int) -> NodeId:
    return NodeId("source", index)


@dataclass(frozen=True)
class EdgeId:
    """One transport path between target `target` and source `source`."""

    target: int
    source: int


@dataclass(frozen=True)
class Network:
    n_targets: int
    n_sources: int
    edges: tuple[EdgeId, ...]
    target_bounds: tuple[tuple[float, float], ...]
    source_bounds: tuple[tuple[float, float], ...]
    #: per-node positions into `edges`, ascending (canonical incident order)
    target_edges: tuple[tuple[int, ...], ...]
    source_edges: tuple[tuple[int, ...], ...]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_nodes(self) -> int:
        return self.n_targets + self.n_sources

    def nodes(self) -> Iterator[NodeId]:
        """All nodes in canonical order: targets first, then sources."""
        for i in range(self.n_targets):
            yield target_node(i)
        for j in range(self.n_sources):
            yield source_node(j)

    def incident(self, node: NodeId) -> tuple[int, ...]:
        """Positions of the node's incident edges in the canonical edge list."""
        if node.kind == "target":
            return self.target_edges[node.index]
        return self.source_edges[node.index]

    def bounds(self, node: NodeId) -> tuple[float, float]:
        if node.kind == "target":
            return self.target_bounds[node.index]
        return self.source_bounds[node.index]


def complete_edges(n_targets: int, n_sources: int) -> list[EdgeId]:
    """Complete bipartite edge list, target-major order."""
    return [EdgeId(t, s) for t in range(n_targets) for s in range(n_sources)]


def _check_bounds(bounds, count: int, label: str) -> tuple[tuple[float, float], ...]:
    if len(bounds) != count:
        raise NetworkError(f"expected {count} {label} bound pairs, got {len(bounds)}")
    out = []
    for i, (lo, hi) in enumerate(bounds):
        lo, hi = float(lo), float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise NetworkError(f"{label} {i}: bounds must be finite")
        if lo < 0:
            raise NetworkError(f"{label} {i}: negative lower bound {lo}")
        if hi < lo:
            raise NetworkError(f"{label} {i}: inverted bounds ({lo}, {hi})")
        out.append((lo, hi))
    return tuple(out)


def build_network(
    n_targets: int,
    n_sources: int,
    edges,
    target_bounds,
    source_bounds,
) -> Network:
    """Validate and assemble a Network with adjacency built.

    Raises NetworkError on duplicate edges, dangling endpoints, inverted or
    negative bounds, or nodes with no incident edge.
    """
    if n_targets < 1 or n_sources < 1:
        raise NetworkError("node counts must be positive")
    edge_ids = []
    seen = set()
    for e in edges:
        eid = e if isinstance(e, EdgeId) else EdgeId(int(e[0]), int(e[1]))
        if not (0 <= eid.target < n_targets):
            raise NetworkError(f"edge {eid}: target index out of range")
        if not (0 <= eid.source < n_sources):
            raise NetworkError(f"edge {eid}: source index out of range")
        key = (eid.target, eid.source)
        if key in seen:
            raise NetworkError(f"duplicate edge {eid}")
        seen.add(key)
        edge_ids.append(eid)

    t_adj: list[list[int]] = [[] for _ in range(n_targets)]
    s_adj: list[list[int]] = [[] for _ in range(n_sources)]
    for pos, eid in enumerate(edge_ids):
        t_adj[eid.target].append(pos)
        s_adj[eid.source].append(pos)
    for i, adj in enumerate(t_adj):
        if not adj:
            raise NetworkError(f"target {i} has no incident edge")
    for j, adj in enumerate(s_adj):
        if not adj:
            raise NetworkError(f"source {j} has no incident edge")

    return Network(
        n_targets=n_targets,
        n_sources=n_sources,
        edges=tuple(edge_ids),
        target_bounds=_check_bounds(target_bounds, n_targets, "target"),
        source_bounds=_check_bounds(source_bounds, n_sources, "source"),
        target_edges=tuple(tuple(a) for a in t_adj),
        source_edges=tuple(tuple(a) for a in s_adj),
    )


@dataclass(frozen=True)
class InfeasibilityWitness:
    """Evidence for infeasibility from the max-flow reduction.

    `deficit` is the amount of lower-bound flow that cannot be routed;
    `starved` lists the constraints left short; `cut` lists original nodes
    on the unsaturated side of the final residual cut.
    """

    deficit: float
    starved: tuple[str, ...]
    cut: tuple[str, ...]

    def __str__(self) -> str:
        return (
            f"deficit {self.deficit:g}; starved constraints: "
            f"{', '.join(self.starved) or 'none'}; cut: {', '.join(self.cut) or 'none'}"
        )


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    witness: InfeasibilityWitness | None = None


class _FlowGraph:
    """Plain residual graph with BFS augmenting paths (Edmonds-Karp)."""

    def __init__(self, n: int):
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[float] = []

    def add(self, u: int, v: int, cap: float) -> int:
        i = len(self.to)
        self.adj[u].append(i)
        self.to.append(v)
        self.cap.append(cap)
        self.adj[v].append(i + 1)
        self.to.append(u)
        self.cap.append(0.0)
        return i

    def max_flow(self, s: int, t: int, eps: float) -> float:
        total = 0.0
        while True:
            prev_arc = [-1] * len(self.adj)
            prev_arc[s] = -2
            queue = deque([s])
            while queue:
                u = queue.popleft()
                if u == t:
                    break
                for a in self.adj[u]:
                    v = self.to[a]
                    if prev_arc[v] == -1 and self.cap[a] > eps:
                        prev_arc[v] = a
                        queue.append(v)
            if prev_arc[t] == -1:
                return total
            bottleneck = float("inf")
            v = t
            while v != s:
                a = prev_arc[v]
                bottleneck = min(bottleneck, self.cap[a])
                v = self.to[a ^ 1]
            v = t
            while v != s:
                a = prev_arc[v]
                self.cap[a] -= bottleneck
                self.cap[a ^ 1] += bottleneck
                v = self.to[a ^ 1]
            total += bottleneck

    def reachable(self, s: int, eps: float) -> set[int]:
        seen = {s}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for a in self.adj[u]:
                v = self.to[a]
                if v not in seen and self.cap[a] > eps:
                    seen.add(v)
                    queue.append(v)
        return seen


def check_feasibility(net: Network) -> FeasibilityResult:
    """Decide whether any nonnegative plan satisfies all interval bounds.

    Uses the standard max-flow reduction for lower-bounded flows: every
    lower bound is converted into an excess/deficit pair and a feasible
    circulation exists iff the auxiliary max flow saturates all excess.
    Total function on valid networks.
    """
    n_t, n_s = net.n_targets, net.n_sources
    # node layout: S, T, targets, sources, super-source, super-sink
    S, T = 0, 1
    tgt0, src0 = 2, 2 + n_t
    sstar, tstar = 2 + n_t + n_s, 3 + n_t + n_s
    g = _FlowGraph(4 + n_t + n_s)
    excess = [0.0] * (4 + n_t + n_s)
    label = {S: "supply-pool", T: "demand-pool"}
    for i in range(n_t):
        label[tgt0 + i] = str(target_node(i))
    for j in range(n_s):
        label[src0 + j] = str(source_node(j))

    def arc(u: int, v: int, lo: float, hi: float) -> None:
        g.add(u, v, hi - lo)
        if lo > 0.0:
            excess[v] += lo
            excess[u] -= lo

    for j, (q_lo, q_hi) in enumerate(net.source_bounds):
        arc(S, src0 + j, q_lo, q_hi)
    for e in net.edges:
        cap = min(net.target_bounds[e.target][1], net.source_bounds[e.source][1])
        arc(src0 + e.source, tgt0 + e.target, 0.0, cap)
    for i, (p_lo, p_hi) in enumerate(net.target_bounds):
        arc(tgt0 + i, T, p_lo, p_hi)
    total_cap = sum(hi for _, hi in net.source_bounds)
    arc(T, S, 0.0, total_cap)

    required = 0.0
    deficit_arcs: list[tuple[int, int]] = []  # (arc id, node) for starvation report
    for v, b in enumerate(excess):
        if b > 0.0:
            g.add(sstar, v, b)
            required += b
        elif b < 0.0:
            a = g.add(v, tstar, -b)
            deficit_arcs.append((a, v))

    scale = max(1.0, required, total_cap)
    eps = _FLOW_EPS * scale
    flow = g.max_flow(sstar, tstar, eps)
    if flow >= required - eps:
        return FeasibilityResult(feasible=True)

    reached = g.reachable(sstar, eps)
    cut = tuple(label[v] for v in sorted(reached) if v in label)
    starved = []
    for a, v in deficit_arcs:
        residual = g.cap[a]
        if residual > eps:
            # the node still owes `residual` units of forced lower-bound flow
            starved.append(f"{label.get(v, str(v))} (short {residual:g})")
    witness = InfeasibilityWitness(
        deficit=required - flow, starved=tuple(starved), cut=cut
    )
    return FeasibilityResult(feasible=False, witness=witness)

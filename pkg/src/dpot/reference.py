"""Centralized oracles for the transport problem.

`solve_centralized_linear` reduces the linear-utility instance to a
min-cost flow with lower bounds on an exactly integer-scaled network and
solves it by successive shortest paths with potentials, so the returned
objective is exact up to descaling. `solve_bruteforce_grid` exhaustively
enumerates tiny instances and backs the general concave case.

The oracle is meant for desk-scale verification: inputs whose rational
representation would overflow the scaling caps are rejected rather than
approximated.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .network import InfeasibleNetworkError, Network, check_feasibility
from .utility import UtilityTable

#: largest admissible integer scaling factor for capacities
MAX_CAPACITY_SCALE = 10**6
#: largest admissible integer scaling factor for costs
MAX_COST_SCALE = 10**9


class OracleScaleError(ValueError):
    """Inputs cannot be integer-scaled exactly within the caps."""


class NonLinearUtilityError(ValueError):
    """The flow oracle only accepts all-linear utility tables."""


@dataclass(frozen=True)
class OracleSolution:
    plan: np.ndarray
    objective: float
    objective_exact: Fraction


def _fractions(values, cap: int, what: str) -> tuple[list[Fraction], int]:
    """Exact rational image of the inputs plus their common denominator."""
    fracs = [Fraction(v) for v in values]
    scale = 1
    for f in fracs:
        scale = scale * f.denominator // math.gcd(scale, f.denominator)
        if scale > cap:
            raise OracleScaleError(
                f"{what} need an integer scale above {cap}; refusing to approximate"
            )
    return fracs, scale


class _MinCostFlow:
    """Residual network solved by successive shortest paths with potentials.

    All capacities and costs are Python ints; lower bounds and negative-cost
    arcs are removed up front by forcing flow and accounting the imbalance
    at excess/deficit nodes, after which every residual cost is nonnegative
    and Dijkstra applies throughout.
    """

    def __init__(self, n: int):
        self.n = n
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[int] = []
        self.excess = [0] * n

    def add(self, u: int, v: int, lo: int, hi: int, cost: int) -> int:
        """Arc with flow bounds [lo, hi]; negative-cost arcs are saturated."""
        forced = hi if cost < 0 else lo
        i = len(self.to)
        self.adj[u].append(i)
        self.to.append(v)
        self.cap.append(hi - forced)
        self.cost.append(cost)
        self.adj[v].append(i + 1)
        self.to.append(u)
        self.cap.append(forced)
        self.cost.append(-cost)
        if forced:
            self.excess[v] += forced
            self.excess[u] -= forced
        return i

    def solve(self) -> bool:
        """Route all excess to deficit nodes; False when impossible."""
        sstar = self.n
        tstar = self.n + 1
        self.adj.append([])
        self.adj.append([])
        self.n += 2
        self.excess += [0, 0]
        need = 0
        for v, b in enumerate(self.excess[:-2]):
            if b > 0:
                self.add(sstar, v, 0, b, 0)
                need += b
            elif b < 0:
                self.add(v, tstar, 0, -b, 0)

        pot = [0] * self.n
        sent = 0
        while sent < need:
            dist, prev = self._dijkstra(sstar, pot)
            d_sink = dist[tstar]
            if d_sink is None:
                return False
            for v in range(self.n):
                # capping at the sink distance keeps every residual reduced
                # cost nonnegative, including arcs out of unreached nodes
                pot[v] += d_sink if dist[v] is None else min(dist[v], d_sink)
            bottleneck = None
            v = tstar
            while v != sstar:
                a = prev[v]
                bottleneck = self.cap[a] if bottleneck is None else min(bottleneck, self.cap[a])
                v = self.to[a ^ 1]
            v = tstar
            while v != sstar:
                a = prev[v]
                self.cap[a] -= bottleneck
                self.cap[a ^ 1] += bottleneck
                v = self.to[a ^ 1]
            sent += bottleneck
        return True

    def _dijkstra(self, src: int, pot: list[int]):
        dist: list[int | None] = [None] * self.n
        prev = [-1] * self.n
        dist[src] = 0
        heap = [(0, src)]
        while heap:
            d, u = heapq.heappop(heap)
            if dist[u] is not None and d > dist[u]:
                continue
            for a in self.adj[u]:
                if self.cap[a] <= 0:
                    continue
                v = self.to[a]
                nd = d + self.cost[a] + pot[u] - pot[v]
                if dist[v] is None or nd < dist[v]:
                    dist[v] = nd
                    prev[v] = a
                    heapq.heappush(heap, (nd, v))
        return dist, prev

    def flow_on(self, arc: int, hi: int) -> int:
        """Flow on an arc added with upper bound `hi`."""
        return hi - self.cap[arc]

    def assert_optimal(self) -> None:
        """Certificate: the residual graph admits no negative cycle."""
        dist = [0] * self.n
        for round_ in range(self.n):
            changed = False
            for u in range(self.n):
                for a in self.adj[u]:
                    if self.cap[a] <= 0:
                        continue
                    v = self.to[a]
                    if dist[u] + self.cost[a] < dist[v]:
                        dist[v] = dist[u] + self.cost[a]
                        changed = True
            if not changed:
                return
        raise RuntimeError("flow oracle certificate failed: negative residual cycle")


def solve_centralized_linear(net: Network, table: UtilityTable) -> OracleSolution:
    """Exact maximizer of the aggregate linear utility under all bounds.

    Raises NonLinearUtilityError for non-linear tables,
    InfeasibleNetworkError when the bounds admit no plan, and
    OracleScaleError when exact integer scaling is impossible.
    """
    table.validate_against(net)
    if not table.all_linear:
        raise NonLinearUtilityError("flow oracle requires linear utilities")

    gains = [
        Fraction(t.slope) + Fraction(s.slope)
        for t, s in zip(table.target, table.source)
    ]
    _, cost_scale = _fractions(
        [float(t.slope) for t in table.target] + [float(s.slope) for s in table.source],
        MAX_COST_SCALE, "slopes",
    )
    bound_values = [b for lo_hi in net.target_bounds + net.source_bounds for b in lo_hi]
    bound_fracs, cap_scale = _fractions(bound_values, MAX_CAPACITY_SCALE, "bounds")

    def scaled_bound(x: float) -> int:
        f = Fraction(x) * cap_scale
        assert f.denominator == 1
        return int(f)

    n_t, n_s = net.n_targets, net.n_sources
    S, T = 0, 1
    tgt0, src0 = 2, 2 + n_t
    g = _MinCostFlow(2 + n_t + n_s)

    for j, (q_lo, q_hi) in enumerate(net.source_bounds):
        g.add(S, src0 + j, scaled_bound(q_lo), scaled_bound(q_hi), 0)
    middle: list[tuple[int, int]] = []  # (arc id, scaled capacity) per edge
    for pos, e in enumerate(net.edges):
        cap = min(net.target_bounds[e.target][1], net.source_bounds[e.source][1])
        cap_int = scaled_bound(cap)
        scaled_gain = gains[pos] * cost_scale
        assert scaled_gain.denominator == 1
        arc = g.add(src0 + e.source, tgt0 + e.target, 0, cap_int, -int(scaled_gain))
        middle.append((arc, cap_int))
    for i, (p_lo, p_hi) in enumerate(net.target_bounds):
        g.add(tgt0 + i, T, scaled_bound(p_lo), scaled_bound(p_hi), 0)
    total = sum(scaled_bound(hi) for _, hi in net.target_bounds)
    g.add(T, S, 0, total, 0)

    if not g.solve():
        feas = check_feasibility(net)
        if feas.feasible:
            raise RuntimeError("flow oracle disagrees with the feasibility check")
        raise InfeasibleNetworkError(feas.witness)
    g.assert_optimal()

    plan = np.empty(net.n_edges)
    objective_exact = Fraction(0)
    for pos, (arc, cap_int) in enumerate(middle):
        flow = g.flow_on(arc, cap_int)
        plan[pos] = flow / cap_scale
        objective_exact += gains[pos] * Fraction(flow, cap_scale)
    return OracleSolution(
        plan=plan, objective=float(objective_exact), objective_exact=objective_exact
    )


#: grid enumeration guard rails
MAX_GRID_EDGES = 4
MAX_GRID_BOUND = 5.0
MAX_GRID_POINTS = 20_000_000


def solve_bruteforce_grid(
    net: Network, table: UtilityTable, step: float
) -> tuple[np.ndarray, float]:
    """Best feasible plan on a regular grid of spacing `step`.

    Exhaustive within the guard rails (at most 4 edges, bounds at most 5);
    for concave objectives the result is within (Lipschitz constant) * step
    * n_edges of the true optimum. Each edge grid always contains 0 and the
    edge capacity, so a coarse step still returns a feasible plan.
    """
    table.validate_against(net)
    if step <= 0 or not math.isfinite(step):
        raise ValueError(f"step must be positive, got {step}")
    if net.n_edges > MAX_GRID_EDGES:
        raise ValueError(f"grid oracle limited to {MAX_GRID_EDGES} edges")
    caps = []
    for e in net.edges:
        cap = min(net.target_bounds[e.target][1], net.source_bounds[e.source][1])
        if cap > MAX_GRID_BOUND:
            raise ValueError(f"grid oracle limited to bounds <= {MAX_GRID_BOUND}")
        caps.append(cap)

    axes = []
    total_points = 1
    for cap in caps:
        pts = np.arange(0.0, cap + 0.5 * step, step)
        if pts[-1] < cap:
            pts = np.append(pts, cap)
        axes.append(pts)
        total_points *= len(pts)
        if total_points > MAX_GRID_POINTS:
            raise ValueError("grid too large; increase step")

    mesh = np.meshgrid(*axes, indexing="ij")
    plans = np.stack([m.ravel() for m in mesh], axis=1)

    tol = 1e-9
    mask = np.ones(len(plans), dtype=bool)
    for i, (lo, hi) in enumerate(net.target_bounds):
        s = plans[:, list(net.target_edges[i])].sum(axis=1)
        mask &= (s >= lo - tol) & (s <= hi + tol)
    for j, (lo, hi) in enumerate(net.source_bounds):
        s = plans[:, list(net.source_edges[j])].sum(axis=1)
        mask &= (s >= lo - tol) & (s <= hi + tol)
    feasible = plans[mask]
    if len(feasible) == 0:
        raise ValueError("no feasible grid point; refine step or check bounds")

    t_gain, t_curv, s_gain, s_curv = table.gain_arrays()
    values = feasible @ (t_gain + s_gain)
    if t_curv.any() or s_curv.any():
        values = values - 0.5 * (feasible * feasible) @ (t_curv + s_curv)
    best = int(np.argmax(values))
    return feasible[best].copy(), float(values[best])

"""Exact per-node subproblem solves.

Each node minimizes a strongly convex objective over the set
{z >= 0, lo <= sum(z) <= hi}. For linear utilities the minimizer is a
Euclidean projection computed exactly by a sort-based breakpoint scan; for
concave-quadratic utilities each coordinate has a closed-form response in
the sum multiplier and the multiplier is found by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .utility import UtilitySpec, _value

#: relative slack when deciding the unconstrained optimum is already feasible;
#: keeps the projection exactly idempotent under float re-summation
_SUM_SLACK = 1e-12

#: bisection stop: |sum(z(lam)) - bound| <= _BISECT_TOL * max(1, hi)
_BISECT_TOL = 1e-10


@dataclass(frozen=True)
class LocalProblem:
    """One node's subproblem for a single round.

    `duals` and `consensus` are the node's incident-edge slices of the
    shared dual and consensus vectors, in canonical incident order.
    """

    side: Literal["target", "source"]
    specs: tuple[UtilitySpec, ...]
    duals: np.ndarray
    consensus: np.ndarray
    eta: float
    lo: float
    hi: float

    def __post_init__(self) -> None:
        n = len(self.specs)
        if len(self.duals) != n or len(self.consensus) != n:
            raise ValueError("duals/consensus length must match specs")
        if not (self.eta > 0) or not math.isfinite(self.eta):
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.lo > self.hi:
            raise ValueError(f"infeasible sum bounds ({self.lo}, {self.hi})")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo < 0:
            raise ValueError("sum bounds must be finite and nonnegative")
        if not (np.all(np.isfinite(self.duals)) and np.all(np.isfinite(self.consensus))):
            raise ValueError("non-finite duals or consensus values")


@dataclass(frozen=True)
class LocalSolution:
    plan: np.ndarray
    multiplier: float
    objective: float


def project_box_sum(v, lo: float, hi: float) -> np.ndarray:
    """argmin ||z - v||^2 over {z >= 0, lo <= sum(z) <= hi}."""
    z, _ = _project_with_shift(np.asarray(v, dtype=float), lo, hi)
    return z


def _project_with_shift(v: np.ndarray, lo: float, hi: float) -> tuple[np.ndarray, float]:
    """Projection plus the shift lam with z = max(v - lam, 0)."""
    if lo > hi:
        raise ValueError(f"infeasible sum bounds ({lo}, {hi})")
    clipped = np.maximum(v, 0.0)
    s0 = float(clipped.sum())
    slack = _SUM_SLACK * max(1.0, abs(lo), abs(hi))
    if lo - slack <= s0 <= hi + slack:
        return clipped, 0.0
    target = hi if s0 > hi else lo
    lam = _sum_shift(v, target)
    return np.maximum(v - lam, 0.0), lam


def _sum_shift(v: np.ndarray, target: float) -> float:
    """Solve sum(max(v - lam, 0)) == target exactly by breakpoint scan.

    On the segment where the k largest coordinates are active the sum is
    linear in lam, so the shift is (sum of active) - target over k; the scan
    picks the segment whose solution respects its own breakpoints.
    """
    vs = np.sort(v)[::-1]
    prefix = np.cumsum(vs)
    n = len(vs)
    best_lam = 0.0
    best_viol = math.inf
    for k in range(1, n + 1):
        lam = float((prefix[k - 1] - target) / k)
        upper = float(vs[k - 1])
        lower = float(vs[k]) if k < n else -math.inf
        if lower <= lam <= upper:
            return lam
        viol = max(lower - lam, lam - upper)
        if viol < best_viol:
            best_viol, best_lam = viol, lam
    # reachable only through float ties at a breakpoint; the least-violating
    # candidate is then within rounding of the exact shift
    return best_lam


def _solve_curved(
    numer: np.ndarray, denom: np.ndarray, lo: float, hi: float
) -> tuple[np.ndarray, float]:
    """Coordinatewise closed form z(lam) = max((numer - lam)/denom, 0) with
    lam bisected until sum(z(lam)) lands on the required bound."""

    def plan(lam: float) -> np.ndarray:
        return np.maximum((numer - lam) / denom, 0.0)

    z0 = plan(0.0)
    s0 = float(z0.sum())
    slack = _SUM_SLACK * max(1.0, abs(lo), abs(hi))
    if lo - slack <= s0 <= hi + slack:
        return z0, 0.0
    target = hi if s0 > hi else lo
    tol = _BISECT_TOL * max(1.0, hi)
    if s0 > target:
        lam_lo, lam_hi = 0.0, float(numer.max())  # sum(z(max numer)) = 0 <= target
    else:
        # push lam low enough that one coordinate alone covers the target
        lam_lo = float(numer.min() - denom.max() * (target + 1.0))
        lam_hi = 0.0
    for _ in range(200):
        mid = 0.5 * (lam_lo + lam_hi)
        s = float(plan(mid).sum())
        if abs(s - target) <= tol:
            return plan(mid), mid
        if s > target:
            lam_lo = mid
        else:
            lam_hi = mid
    raise RuntimeError("multiplier bisection did not reach tolerance")


def solve_node_arrays(
    gain: np.ndarray,
    curv: np.ndarray,
    duals: np.ndarray,
    dual_sign: float,
    consensus: np.ndarray,
    eta: float,
    lo: float,
    hi: float,
) -> tuple[np.ndarray, float]:
    """Array-level subproblem solve shared by the iteration engines.

    Minimizes  -sum u_i(z_i) + dual term + (eta/2)||z - consensus||^2
    where the dual term is +sum(duals*z) for targets (dual_sign = -1) and
    -sum(duals*z) for sources (dual_sign = +1). Returns (plan, multiplier)
    with the multiplier in objective-gradient units.
    """
    numer = gain + dual_sign * duals + eta * consensus
    if curv.any():
        return _solve_curved(numer, curv + eta, lo, hi)
    z, shift = _project_with_shift(numer / eta, lo, hi)
    return z, eta * shift


def _finish(
    problem: LocalProblem, dual_sign: float, plan: np.ndarray, multiplier: float
) -> LocalSolution:
    utility = sum(_value(s, z) for s, z in zip(problem.specs, plan))
    diff = plan - problem.consensus
    objective = (
        -utility
        - dual_sign * float(problem.duals @ plan)
        + 0.5 * problem.eta * float(diff @ diff)
    )
    total = float(plan.sum())
    tol = 1e-9 * max(1.0, problem.hi)
    if plan.min() < 0 or not (problem.lo - tol <= total <= problem.hi + tol):
        raise RuntimeError("subproblem solution violates its constraint set")
    return LocalSolution(plan=plan, multiplier=multiplier, objective=objective)


def _solve(problem: LocalProblem, dual_sign: float) -> LocalSolution:
    gain = np.array([s.gain for s in problem.specs], dtype=float)
    curv = np.array([s.curvature for s in problem.specs], dtype=float)
    plan, multiplier = solve_node_arrays(
        gain, curv, problem.duals, dual_sign, problem.consensus,
        problem.eta, problem.lo, problem.hi,
    )
    return _finish(problem, dual_sign, plan, multiplier)


def solve_target_subproblem(problem: LocalProblem) -> LocalSolution:
    """Exact minimizer of the target-side round objective."""
    if problem.side != "target":
        raise ValueError("problem is not a target subproblem")
    return _solve(problem, dual_sign=-1.0)


def solve_source_subproblem(problem: LocalProblem) -> LocalSolution:
    """Exact minimizer of the source-side round objective.

    The dual term enters with the opposite sign relative to the target side,
    so in the linear case the unconstrained optimum is
    consensus + (gain + dual)/eta.
    """
    if problem.side != "source":
        raise ValueError("problem is not a source subproblem")
    return _solve(problem, dual_sign=1.0)

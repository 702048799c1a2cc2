"""Independent test oracles.

These deliberately avoid the package's solver code paths: the QP oracle
enumerates closed-form candidates over supports and active sum constraints,
and the grid oracle refines a lattice search. Objectives are evaluated from
the raw formulas.
"""

from __future__ import annotations

import itertools

import numpy as np


def subproblem_objective(gain, curv, duals, dual_sign, consensus, eta, z) -> float:
    """-sum u(z) - dual_sign * duals.z + (eta/2)||z - consensus||^2."""
    z = np.asarray(z, dtype=float)
    util = float(gain @ z - 0.5 * curv @ (z * z))
    diff = z - consensus
    return -util - dual_sign * float(np.dot(duals, z)) + 0.5 * eta * float(diff @ diff)


def enumerate_qp_minimum(gain, curv, duals, dual_sign, consensus, eta, lo, hi):
    """Exact minimizer by support/active-set enumeration (n <= 6).

    The optimum restricted to a support S with the sum either free or pinned
    to a bound has a closed form; enumerating all (S, mode) candidates and
    keeping the best feasible one finds the global optimum of this strongly
    convex problem.
    """
    gain = np.asarray(gain, dtype=float)
    curv = np.asarray(curv, dtype=float)
    duals = np.asarray(duals, dtype=float)
    consensus = np.asarray(consensus, dtype=float)
    n = len(gain)
    numer = gain + dual_sign * duals + eta * consensus
    denom = curv + eta

    candidates = []
    if lo <= 0.0:
        candidates.append(np.zeros(n))
    for r in range(1, n + 1):
        for support in itertools.combinations(range(n), r):
            s = list(support)
            free = numer[s] / denom[s]
            z = np.zeros(n)
            z[s] = free
            candidates.append(z)
            for bound in (lo, hi):
                lam = (np.sum(numer[s] / denom[s]) - bound) / np.sum(1.0 / denom[s])
                z = np.zeros(n)
                z[s] = (numer[s] - lam) / denom[s]
                candidates.append(z)

    tol = 1e-12 * max(1.0, hi)
    best = None
    best_val = None
    for z in candidates:
        if z.min() < -tol:
            continue
        z = np.maximum(z, 0.0)
        total = z.sum()
        if total < lo - 1e-9 or total > hi + 1e-9:
            continue
        val = subproblem_objective(gain, curv, duals, dual_sign, consensus, eta, z)
        if best_val is None or val < best_val:
            best_val, best = val, z
    assert best is not None, "enumeration found no feasible candidate"
    return best, best_val


def refining_grid_minimum(
    objective, n, lo, hi, cap, stages=(0.05, 0.005, 0.001), span=10
):
    """Lattice minimization of a convex objective over
    {z in [0, cap]^n, lo <= sum(z) <= hi}, refined around each stage's best.

    All lattices are anchored at multiples of the stage step, so constraint
    faces whose bounds are step multiples contain lattice points. If a
    refinement lands on its own window edge (not a box edge) the window is
    widened and the stage redone, which certifies coverage.
    """
    window_lo = np.zeros(n)
    window_hi = np.full(n, float(cap))
    best = None
    best_val = None
    for step in stages:
        for attempt in range(6):
            axes = []
            for i in range(n):
                start = np.floor(window_lo[i] / step) * step
                pts = np.arange(start, window_hi[i] + 0.5 * step, step)
                pts = np.clip(pts, 0.0, cap)
                axes.append(np.unique(pts))
            best, best_val = _grid_scan(objective, axes, lo, hi)
            on_edge = False
            for i in range(n):
                if best[i] <= window_lo[i] + 1e-12 and window_lo[i] > 1e-12:
                    on_edge = True
                if best[i] >= window_hi[i] - 1e-12 and window_hi[i] < cap - 1e-12:
                    on_edge = True
            if not on_edge:
                break
            window_lo = np.maximum(0.0, window_lo - span * step * (attempt + 1))
            window_hi = np.minimum(cap, window_hi + span * step * (attempt + 1))
        else:
            raise AssertionError("grid refinement kept hitting its window edge")
        window_lo = np.maximum(0.0, best - span * step)
        window_hi = np.minimum(cap, best + span * step)
    return best, best_val


def _grid_scan(objective, axes, lo, hi, chunk=400_000):
    sizes = [len(a) for a in axes]
    total = int(np.prod(sizes))
    best = None
    best_val = None
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        flat = np.arange(start, stop)
        coords = np.empty((stop - start, len(axes)))
        rem = flat
        for i in range(len(axes) - 1, -1, -1):
            rem, idx = np.divmod(rem, sizes[i])
            coords[:, i] = axes[i][idx]
        sums = coords.sum(axis=1)
        mask = (sums >= lo - 1e-9) & (sums <= hi + 1e-9)
        if not mask.any():
            continue
        feas = coords[mask]
        vals = objective(feas)
        k = int(np.argmin(vals))
        if best_val is None or vals[k] < best_val:
            best_val = float(vals[k])
            best = feas[k].copy()
    assert best is not None, "no feasible lattice point"
    return best, best_val

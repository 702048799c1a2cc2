import numpy as np
import pytest

from dpot.local_solver import (
    LocalProblem,
    project_box_sum,
    solve_source_subproblem,
    solve_target_subproblem,
)
from dpot.utility import UtilitySpec, grad_utility
from oracles import enumerate_qp_minimum, subproblem_objective


def _linear_problem(side, slopes, duals, consensus, eta, lo, hi):
    return LocalProblem(
        side=side,
        specs=tuple(UtilitySpec.linear_form(s) for s in slopes),
        duals=np.asarray(duals, dtype=float),
        consensus=np.asarray(consensus, dtype=float),
        eta=eta,
        lo=lo,
        hi=hi,
    )


# ---------------------------------------------------------------- projection

def test_project_identity_when_feasible():
    assert np.array_equal(project_box_sum([1.0, 2.0], 0.0, 10.0), [1.0, 2.0])


def test_project_symmetric_clip():
    # lambda = 1 from the breakpoint equation; KKT checked below
    z = project_box_sum([3.0, 3.0], 0.0, 4.0)
    assert np.allclose(z, [2.0, 2.0], atol=1e-12)


def test_project_negative_clips_to_zero():
    assert np.array_equal(project_box_sum([-1.0, 2.0], 0.0, 10.0), [0.0, 2.0])


def test_project_pushes_up_to_lower_bound():
    # lambda = -6 lifts both coordinates until the sum reaches lo
    z = project_box_sum([-5.0, -5.0], 2.0, 4.0)
    assert np.allclose(z, [1.0, 1.0], atol=1e-12)


def test_project_rejects_inverted_interval():
    with pytest.raises(ValueError):
        project_box_sum([1.0], 3.0, 2.0)


def test_projection_idempotent_exactly(rng):
    for _ in range(200):
        n = int(rng.integers(1, 6))
        v = rng.uniform(-5, 5, n)
        hi = float(rng.uniform(0.5, 6))
        lo = float(rng.uniform(0, hi)) if rng.random() < 0.5 else 0.0
        once = project_box_sum(v, lo, hi)
        twice = project_box_sum(once, lo, hi)
        assert np.array_equal(once, twice)


def test_projection_is_argmin_by_enumeration(rng):
    # projection == subproblem with zero slopes/duals, eta 1, consensus v
    for _ in range(100):
        n = int(rng.integers(1, 4))
        v = rng.uniform(-4, 6, n)
        hi = float(rng.uniform(0.5, 5))
        lo = float(rng.uniform(0, hi)) if rng.random() < 0.5 else 0.0
        z = project_box_sum(v, lo, hi)
        expected, _ = enumerate_qp_minimum(
            np.zeros(n), np.zeros(n), np.zeros(n), -1.0, v, 1.0, lo, hi
        )
        assert np.allclose(z, expected, atol=1e-9)


# ------------------------------------------------------------- target solves

def test_target_interior_optimum():
    p = _linear_problem("target", [1.0, 2.0], [0.0, 0.0], [0.0, 0.0], 1.0, 0.0, 10.0)
    sol = solve_target_subproblem(p)
    assert np.allclose(sol.plan, [1.0, 2.0], atol=1e-12)
    assert sol.multiplier == 0.0


def test_target_projected_to_cap():
    # unconstrained optimum (3,3) exceeds the cap; verified against the
    # enumeration oracle below and by the KKT certificate
    p = _linear_problem("target", [3.0, 3.0], [0.0, 0.0], [0.0, 0.0], 1.0, 0.0, 4.0)
    sol = solve_target_subproblem(p)
    assert np.allclose(sol.plan, [2.0, 2.0], atol=1e-12)
    expected, val = enumerate_qp_minimum(
        np.array([3.0, 3.0]), np.zeros(2), np.zeros(2), -1.0, np.zeros(2), 1.0, 0.0, 4.0
    )
    assert sol.objective == pytest.approx(val, abs=1e-10)


def test_target_negative_coordinate_clips():
    # duals push the first coordinate negative: z* = (-1, 2) -> (0, 2)
    p = _linear_problem("target", [0.0, 0.0], [1.0, -2.0], [0.0, 0.0], 1.0, 0.0, 10.0)
    sol = solve_target_subproblem(p)
    assert np.array_equal(sol.plan, [0.0, 2.0])


def test_target_requires_target_side():
    p = _linear_problem("source", [1.0], [0.0], [0.0], 1.0, 0.0, 1.0)
    with pytest.raises(ValueError, match="target"):
        solve_target_subproblem(p)


# ------------------------------------------------------------- source solves

def test_source_interior_optimum():
    # z* = pi + (gamma + alpha)/eta = 1 + 2/1 = 3, interior
    p = _linear_problem("source", [2.0], [0.0], [1.0], 1.0, 0.0, 10.0)
    sol = solve_source_subproblem(p)
    assert np.allclose(sol.plan, [3.0], atol=1e-12)


def test_source_asymmetric_projection():
    # z* = (3, 1); the projection shifts both by lambda = 0.5, keeping both
    # positive: plan (2.5, 0.5). Frozen from the enumeration oracle, which
    # is asserted alongside.
    p = _linear_problem("source", [2.0, 2.0], [1.0, -1.0], [0.0, 0.0], 1.0, 0.0, 3.0)
    sol = solve_source_subproblem(p)
    expected, val = enumerate_qp_minimum(
        np.array([2.0, 2.0]), np.zeros(2), np.array([1.0, -1.0]), 1.0,
        np.zeros(2), 1.0, 0.0, 3.0,
    )
    assert np.allclose(expected, [2.5, 0.5], atol=1e-9)
    assert np.allclose(sol.plan, [2.5, 0.5], atol=1e-9)
    assert sol.objective == pytest.approx(val, abs=1e-10)


def test_source_equality_bounds_forced():
    p = _linear_problem("source", [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], 1.0, 5.0, 5.0)
    sol = solve_source_subproblem(p)
    assert sol.plan.sum() == pytest.approx(5.0, abs=1e-9)
    assert sol.plan.min() >= 0


def test_infeasible_bounds_rejected():
    with pytest.raises(ValueError, match="sum bounds"):
        _linear_problem("target", [1.0], [0.0], [0.0], 1.0, 3.0, 2.0)


def test_nonfinite_inputs_rejected():
    with pytest.raises(ValueError, match="non-finite"):
        _linear_problem("target", [1.0], [float("nan")], [0.0], 1.0, 0.0, 2.0)


# --------------------------------------------------------------- properties

def _random_problem(rng, allow_quad=True):
    n = int(rng.integers(1, 4))
    side = "target" if rng.random() < 0.5 else "source"
    specs = []
    hi = float(rng.uniform(0.5, 5))
    lo = float(rng.uniform(0, hi)) if rng.random() < 0.3 else 0.0
    for _ in range(n):
        if allow_quad and rng.random() < 0.5:
            a = float(rng.uniform(0.2, 4))
            specs.append(UtilitySpec.quad_form(a, float(rng.uniform(0, a / max(hi, 0.5)))))
        else:
            specs.append(UtilitySpec.linear_form(float(rng.uniform(0, 5))))
    return LocalProblem(
        side=side,
        specs=tuple(specs),
        duals=rng.uniform(-4, 4, n),
        consensus=rng.uniform(-1, 5, n),
        eta=float(rng.uniform(0.4, 2.5)),
        lo=lo,
        hi=hi,
    )


def _solve(p):
    return solve_target_subproblem(p) if p.side == "target" else solve_source_subproblem(p)


def test_kkt_certificate(rng):
    for _ in range(200):
        p = _random_problem(rng)
        sol = _solve(p)
        sign = -1.0 if p.side == "target" else 1.0
        total = sol.plan.sum()
        for i, z in enumerate(sol.plan):
            grad = (
                -grad_utility(p.specs[i], max(z, 0.0))
                - sign * p.duals[i]
                + p.eta * (z - p.consensus[i])
            )
            reduced = grad + sol.multiplier
            if z > 1e-9:
                assert abs(reduced) <= 1e-7, (p, sol.plan, i)
            else:
                assert reduced >= -1e-7
        # complementary slackness for the sum constraint
        if sol.multiplier > 1e-7:
            assert total == pytest.approx(p.hi, abs=1e-6)
        elif sol.multiplier < -1e-7:
            assert total == pytest.approx(p.lo, abs=1e-6)


def test_objective_matches_enumeration_oracle(rng):
    for _ in range(150):
        p = _random_problem(rng)
        sol = _solve(p)
        sign = -1.0 if p.side == "target" else 1.0
        gain = np.array([s.gain for s in p.specs])
        curv = np.array([s.curvature for s in p.specs])
        _, val = enumerate_qp_minimum(
            gain, curv, p.duals, sign, p.consensus, p.eta, p.lo, p.hi
        )
        assert sol.objective <= val + 1e-8
        assert sol.objective == pytest.approx(val, abs=1e-7)


def test_linear_solutions_contract_in_duals(rng):
    # the computational heart of the sensitivity bound: for linear
    # utilities the solve is a projection of an affine map of the duals
    for _ in range(100):
        p = _random_problem(rng, allow_quad=False)
        other_duals = p.duals + rng.uniform(-2, 2, len(p.duals))
        q = LocalProblem(
            side=p.side, specs=p.specs, duals=other_duals,
            consensus=p.consensus, eta=p.eta, lo=p.lo, hi=p.hi,
        )
        a = _solve(p).plan
        b = _solve(q).plan
        assert np.linalg.norm(a - b) <= (
            np.linalg.norm(p.duals - other_duals) / p.eta + 1e-9
        )


def test_quad_path_against_enumeration(rng):
    for _ in range(80):
        n = int(rng.integers(1, 4))
        hi = float(rng.uniform(1, 5))
        a = rng.uniform(0.3, 4, n)
        b = a / hi * rng.uniform(0.1, 0.9, n)
        specs = tuple(UtilitySpec.quad_form(x, y) for x, y in zip(a, b))
        p = LocalProblem(
            side="target", specs=specs, duals=rng.uniform(-3, 3, n),
            consensus=rng.uniform(0, hi, n), eta=float(rng.uniform(0.5, 2)),
            lo=0.0, hi=hi,
        )
        sol = solve_target_subproblem(p)
        expected, val = enumerate_qp_minimum(
            a, b, p.duals, -1.0, p.consensus, p.eta, 0.0, hi
        )
        assert sol.objective == pytest.approx(val, abs=1e-7)
        assert np.allclose(sol.plan, expected, atol=1e-5)

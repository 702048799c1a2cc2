import numpy as np
import pytest

from conftest import random_network, random_table
from dpot.network import build_network
from dpot.utility import (
    UtilitySpec,
    UtilityTable,
    check_slope_bound,
    eval_utility,
    grad_utility,
    linear_table,
)


def test_eval_examples():
    assert eval_utility(UtilitySpec.linear_form(3), 2.0) == 6.0
    assert eval_utility(UtilitySpec.quad_form(4, 1), 2.0) == 6.0
    assert eval_utility(UtilitySpec.linear_form(0), 7.5) == 0.0


def test_eval_rejects_negative_amount():
    with pytest.raises(ValueError, match="negative"):
        eval_utility(UtilitySpec.linear_form(1), -0.1)
    with pytest.raises(ValueError, match="negative"):
        grad_utility(UtilitySpec.quad_form(1, 0), -1.0)


def test_grad_examples():
    assert grad_utility(UtilitySpec.linear_form(5), 7.0) == 5.0
    assert grad_utility(UtilitySpec.quad_form(4, 1), 2.0) == 2.0


def test_invalid_specs_rejected():
    with pytest.raises(ValueError):
        UtilitySpec.linear_form(-1.0)
    with pytest.raises(ValueError):
        UtilitySpec.quad_form(-0.5, 1.0)
    with pytest.raises(ValueError):
        UtilitySpec.quad_form(1.0, -0.5)


def test_grad_matches_finite_differences(rng):
    h = 1e-6
    for _ in range(50):
        if rng.random() < 0.5:
            spec = UtilitySpec.linear_form(float(rng.uniform(0, 5)))
        else:
            a = float(rng.uniform(0.5, 5))
            spec = UtilitySpec.quad_form(a, float(rng.uniform(0, 1)))
        pi = float(rng.uniform(h, 4))
        numeric = (eval_utility(spec, pi + h) - eval_utility(spec, pi - h)) / (2 * h)
        exact = grad_utility(spec, pi)
        assert numeric == pytest.approx(exact, rel=1e-6, abs=1e-6)


def test_concavity_and_nonincreasing_grad(rng):
    for _ in range(50):
        a = float(rng.uniform(0.5, 5))
        spec = UtilitySpec.quad_form(a, float(rng.uniform(0, 1)))
        p1, p2 = sorted(rng.uniform(0, 4, 2))
        lam = float(rng.uniform(0, 1))
        mid = lam * p1 + (1 - lam) * p2
        assert eval_utility(spec, mid) >= (
            lam * eval_utility(spec, p1) + (1 - lam) * eval_utility(spec, p2) - 1e-9
        )
        assert grad_utility(spec, p2) <= grad_utility(spec, p1) + 1e-12


def _net_1x1(p_hi=5.0, q_hi=5.0):
    return build_network(1, 1, [(0, 0)], [(0, p_hi)], [(0, q_hi)])


def test_slope_bound_equality_is_ok():
    net = _net_1x1()
    table = linear_table([2.0], [2.0])
    assert check_slope_bound(table, 2.0, net).ok


def test_slope_bound_reports_violations():
    # the reference configuration pairs rho = 2 with slopes up to 5; the
    # audit must surface exactly that kind of inconsistency
    net = _net_1x1()
    table = linear_table([5.0], [1.0])
    report = check_slope_bound(table, 2.0, net)
    assert not report.ok
    assert report.violations == ((0, "target"),)


def test_slope_bound_quad_uses_gain():
    net = _net_1x1(p_hi=3.0, q_hi=3.0)
    table = UtilityTable(
        target=(UtilitySpec.quad_form(3, 1),), source=(UtilitySpec.quad_form(3, 1),)
    )
    assert check_slope_bound(table, 3.0, net).ok


def test_table_must_match_network():
    net = _net_1x1()
    table = linear_table([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError, match="entries"):
        table.validate_against(net)


def test_quad_monotonicity_window_enforced():
    net = _net_1x1(p_hi=5.0)
    table = UtilityTable(
        target=(UtilitySpec.quad_form(4, 1),),  # a - b*5 = -1 < 0
        source=(UtilitySpec.linear_form(1),),
    )
    with pytest.raises(ValueError, match="monotone"):
        table.validate_against(net)


def test_random_tables_pass_validation(rng):
    for _ in range(20):
        net = random_network(rng)
        table = random_table(rng, net)
        table.validate_against(net)

import itertools

import numpy as np
import pytest

from conftest import random_network
from dpot.network import (
    EdgeId,
    NetworkError,
    build_network,
    check_feasibility,
    complete_edges,
    source_node,
    target_node,
)


def test_smallest_valid_network():
    net = build_network(1, 1, [(0, 0)], [(0, 5)], [(0, 3)])
    assert net.n_edges == 1
    assert net.edges[0] == EdgeId(0, 0)
    assert net.incident(target_node(0)) == (0,)
    assert net.incident(source_node(0)) == (0,)


def test_case_study_scale_complete_bipartite():
    net = build_network(
        30, 4, complete_edges(30, 4),
        [(0, 5)] * 30, [(0, 40)] * 4,
    )
    assert net.n_edges == 120


def test_duplicate_edge_rejected():
    with pytest.raises(NetworkError, match="duplicate"):
        build_network(1, 1, [(0, 0), (0, 0)], [(0, 5)], [(0, 3)])


def test_dangling_endpoints_rejected():
    with pytest.raises(NetworkError, match="target index"):
        build_network(1, 1, [(1, 0)], [(0, 5)], [(0, 3)])
    with pytest.raises(NetworkError, match="source index"):
        build_network(1, 1, [(0, 2)], [(0, 5)], [(0, 3)])


def test_bad_bounds_rejected():
    with pytest.raises(NetworkError, match="negative"):
        build_network(1, 1, [(0, 0)], [(-1, 5)], [(0, 3)])
    with pytest.raises(NetworkError, match="inverted"):
        build_network(1, 1, [(0, 0)], [(4, 2)], [(0, 3)])
    with pytest.raises(NetworkError, match="finite"):
        build_network(1, 1, [(0, 0)], [(0, float("inf"))], [(0, 3)])


def test_isolated_node_rejected():
    with pytest.raises(NetworkError, match="no incident edge"):
        build_network(2, 1, [(0, 0)], [(0, 5), (0, 5)], [(0, 3)])
    with pytest.raises(NetworkError, match="no incident edge"):
        build_network(1, 2, [(0, 0)], [(0, 5)], [(0, 3), (0, 3)])


def test_adjacency_matches_brute_scan(rng):
    for _ in range(25):
        net = random_network(rng)
        for node in net.nodes():
            expected = tuple(
                pos for pos, e in enumerate(net.edges)
                if (node.kind == "target" and e.target == node.index)
                or (node.kind == "source" and e.source == node.index)
            )
            assert net.incident(node) == expected


def test_zero_lower_bounds_always_feasible(rng):
    for _ in range(20):
        net = random_network(rng)
        assert check_feasibility(net).feasible


def test_target_demands_more_than_supply():
    net = build_network(1, 1, [(0, 0)], [(4, 5)], [(0, 3)])
    result = check_feasibility(net)
    assert not result.feasible
    assert result.witness.deficit == pytest.approx(1.0)


def test_two_by_two_witness():
    # both targets force 2 units in, sources can emit only 1 each
    net = build_network(
        2, 2, [(0, 0), (0, 1), (1, 0), (1, 1)],
        [(2, 5), (2, 5)], [(0, 1), (0, 1)],
    )
    result = check_feasibility(net)
    assert not result.feasible
    assert result.witness.deficit == pytest.approx(2.0)
    assert result.witness.starved  # at least one starved constraint named
    assert str(result.witness)


def _brute_feasible(net) -> bool:
    # integral bounds make the constraint polytope integral, so scanning
    # integer plans decides real feasibility exactly
    ranges = []
    for e in net.edges:
        cap = int(min(net.target_bounds[e.target][1], net.source_bounds[e.source][1]))
        ranges.append(range(cap + 1))
    for plan in itertools.product(*ranges):
        ok = True
        for i, (lo, hi) in enumerate(net.target_bounds):
            s = sum(plan[pos] for pos in net.target_edges[i])
            if not lo <= s <= hi:
                ok = False
                break
        if ok:
            for j, (lo, hi) in enumerate(net.source_bounds):
                s = sum(plan[pos] for pos in net.source_edges[j])
                if not lo <= s <= hi:
                    ok = False
                    break
        if ok:
            return True
    return False


def test_feasibility_matches_bruteforce(rng):
    agree = 0
    infeasible_seen = 0
    for _ in range(60):
        n_t = int(rng.integers(1, 3))
        n_s = int(rng.integers(1, 3))
        edges = [(t, s) for t in range(n_t) for s in range(n_s)]
        if len(edges) > 4:
            continue

        def bounds(n):
            out = []
            for _ in range(n):
                hi = int(rng.integers(0, 6))
                lo = int(rng.integers(0, hi + 1)) if rng.random() < 0.5 else 0
                out.append((lo, hi))
            return out

        try:
            net = build_network(n_t, n_s, edges, bounds(n_t), bounds(n_s))
        except NetworkError:
            continue
        expected = _brute_feasible(net)
        got = check_feasibility(net).feasible
        assert got == expected
        agree += 1
        infeasible_seen += not expected
    assert agree >= 30
    assert infeasible_seen >= 3  # the sample must actually exercise both sides

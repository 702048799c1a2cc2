import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from dpot.network import Network, build_network
from dpot.utility import UtilitySpec, UtilityTable


def random_network(
    rng: np.random.Generator,
    max_targets: int = 5,
    max_sources: int = 4,
    max_target_cap: int = 5,
    max_source_cap: int = 8,
) -> Network:
    """Random feasible network: sparse-ish edges, zero lower bounds."""
    n_t = int(rng.integers(1, max_targets + 1))
    n_s = int(rng.integers(1, max_sources + 1))
    edges = set()
    for t in range(n_t):
        for s in range(n_s):
            if rng.random() < 0.6:
                edges.add((t, s))
    for t in range(n_t):
        if not any(e[0] == t for e in edges):
            edges.add((t, int(rng.integers(n_s))))
    for s in range(n_s):
        if not any(e[1] == s for e in edges):
            edges.add((int(rng.integers(n_t)), s))
    return build_network(
        n_t,
        n_s,
        sorted(edges),
        [(0.0, float(rng.integers(1, max_target_cap + 1))) for _ in range(n_t)],
        [(0.0, float(rng.integers(1, max_source_cap + 1))) for _ in range(n_s)],
    )


def random_linear_table(rng: np.random.Generator, net: Network) -> UtilityTable:
    delta = rng.integers(0, 6, net.n_edges).astype(float)
    gamma = rng.integers(0, 6, net.n_edges).astype(float)
    return UtilityTable(
        target=tuple(UtilitySpec.linear_form(d) for d in delta),
        source=tuple(UtilitySpec.linear_form(g) for g in gamma),
    )


def random_table(
    rng: np.random.Generator, net: Network, quad_prob: float = 0.4
) -> UtilityTable:
    """Mixed linear/quadratic table respecting the monotonicity window."""

    def spec(pi_max: float) -> UtilitySpec:
        if rng.random() < quad_prob:
            a = float(rng.uniform(0.5, 4.0))
            b_cap = a / max(pi_max, 0.1)
            b = float(rng.uniform(0.0, 0.9 * b_cap))
            return UtilitySpec.quad_form(a, b)
        return UtilitySpec.linear_form(float(rng.integers(0, 6)))

    target = []
    source = []
    for edge in net.edges:
        target.append(spec(net.target_bounds[edge.target][1]))
        source.append(spec(net.source_bounds[edge.source][1]))
    return UtilityTable(target=tuple(target), source=tuple(source))


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)

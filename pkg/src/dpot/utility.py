"""Per-edge utility functions: linear and concave-quadratic families.

Both families are concave, monotone increasing on the feasible range, and
continuously differentiable. The quadratic form is u(pi) = a*pi - (b/2)*pi^2
with b >= 0; monotonicity is only guaranteed up to pi = a/b, so tables are
validated against the owning node's upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .network import Network

UtilityForm = Literal["linear", "quad"]


@dataclass(frozen=True)
class UtilitySpec:
    form: UtilityForm
    slope: float = 0.0
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self) -> None:
        if self.form == "linear":
            if not math.isfinite(self.slope) or self.slope < 0:
                raise ValueError(f"linear utility needs slope >= 0, got {self.slope}")
        elif self.form == "quad":
            if not (math.isfinite(self.a) and math.isfinite(self.b)):
                raise ValueError("quad utility needs finite coefficients")
            if self.a < 0 or self.b < 0:
                raise ValueError(f"quad utility needs a >= 0 and b >= 0, got ({self.a}, {self.b})")
        else:
            raise ValueError(f"unknown utility form {self.form!r}")

    @classmethod
    def linear_form(cls, slope: float) -> "UtilitySpec":
        return cls(form="linear", slope=float(slope))

    @classmethod
    def quad_form(cls, a: float, b: float) -> "UtilitySpec":
        return cls(form="quad", a=float(a), b=float(b))

    @property
    def gain(self) -> float:
        """Linear coefficient (the derivative at pi = 0)."""
        return self.slope if self.form == "linear" else self.a

    @property
    def curvature(self) -> float:
        """Quadratic coefficient b; zero for the linear form."""
        return 0.0 if self.form == "linear" else self.b


def _value(spec: UtilitySpec, pi: float) -> float:
    # formula evaluation without the domain check; perturbed plans may be
    # negative and still need a utility reading
    if spec.form == "linear":
        return spec.slope * pi
    return spec.a * pi - 0.5 * spec.b * pi * pi


def eval_utility(spec: UtilitySpec, pi: float) -> float:
    """Utility of transporting `pi` units. Rejects negative amounts."""
    if pi < 0:
        raise ValueError(f"negative transport amount {pi}")
    return _value(spec, pi)


def grad_utility(spec: UtilitySpec, pi: float) -> float:
    """Derivative of the utility at `pi`."""
    if pi < 0:
        raise ValueError(f"negative transport amount {pi}")
    if spec.form == "linear":
        return spec.slope
    return spec.a - spec.b * pi


@dataclass(frozen=True)
class UtilityTable:
    """Per-edge (target utility, source utility) pairs in canonical edge order."""

    target: tuple[UtilitySpec, ...]
    source: tuple[UtilitySpec, ...]

    def __post_init__(self) -> None:
        if len(self.target) != len(self.source):
            raise ValueError("target and source utility lists differ in length")

    @property
    def n_edges(self) -> int:
        return len(self.target)

    @property
    def all_linear(self) -> bool:
        return all(s.form == "linear" for s in self.target + self.source)

    def validate_against(self, net: Network) -> None:
        """Check the table matches the network and stays monotone on range."""
        if self.n_edges != net.n_edges:
            raise ValueError(
                f"utility table has {self.n_edges} entries for {net.n_edges} edges"
            )
        for pos, edge in enumerate(net.edges):
            for spec, pi_max, owner in (
                (self.target[pos], net.target_bounds[edge.target][1], "target"),
                (self.source[pos], net.source_bounds[edge.source][1], "source"),
            ):
                if spec.form == "quad" and spec.a - spec.b * pi_max < 0:
                    raise ValueError(
                        f"edge {pos} {owner} utility not monotone on [0, {pi_max}]: "
                        f"a - b*pi_max = {spec.a - spec.b * pi_max}"
                    )

    def gain_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(target gains, target curvatures, source gains, source curvatures)."""
        t_gain = np.array([s.gain for s in self.target], dtype=float)
        t_curv = np.array([s.curvature for s in self.target], dtype=float)
        s_gain = np.array([s.gain for s in self.source], dtype=float)
        s_curv = np.array([s.curvature for s in self.source], dtype=float)
        return t_gain, t_curv, s_gain, s_curv


def linear_table(delta, gamma) -> UtilityTable:
    """Build an all-linear table from per-edge slope sequences."""
    return UtilityTable(
        target=tuple(UtilitySpec.linear_form(d) for d in delta),
        source=tuple(UtilitySpec.linear_form(g) for g in gamma),
    )


@dataclass(frozen=True)
class SlopeBoundReport:
    ok: bool
    #: (edge position, "target" | "source") pairs whose derivative can exceed rho
    violations: tuple[tuple[int, str], ...]


def check_slope_bound(table: UtilityTable, rho: float, net: Network) -> SlopeBoundReport:
    """Flag every utility whose derivative exceeds `rho` somewhere feasible.

    The maximum derivative of both families is attained at pi = 0 and equals
    the gain, so the check is exact. This is an advisory audit: violations
    are reported, never rejected, because reference configurations pair
    rho = 2 with slopes up to 5 (see README).
    """
    if not (rho > 0) or not math.isfinite(rho):
        raise ValueError(f"gradient bound rho must be positive, got {rho}")
    table.validate_against(net)
    violations = []
    for pos in range(table.n_edges):
        if table.target[pos].gain > rho:
            violations.append((pos, "target"))
        if table.source[pos].gain > rho:
            violations.append((pos, "source"))
    return SlopeBoundReport(ok=not violations, violations=tuple(violations))

"""Scenario files: the JSON schema binding networks, utilities, solver and
privacy settings together, plus the bundled case-study generator.

Unknown fields are rejected everywhere. Scenarios are fully reproducible
from (schema_version, seed): the generator materializes every randomly
drawn value into the file it writes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .engine import SolveOptions
from .network import Network, build_network, complete_edges
from .privacy import PrivacyConfig
from .utility import UtilitySpec, UtilityTable

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """A scenario is syntactically valid but semantically unusable."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class UtilityFunctionModel(_Model):
    form: Literal["linear", "quad"] = "linear"
    slope: float | None = None
    a: float | None = None
    b: float | None = None

    @model_validator(mode="after")
    def _check_fields(self):
        if self.form == "linear":
            if self.slope is None or self.a is not None or self.b is not None:
                raise ValueError("linear utility takes exactly `slope`")
        else:
            if self.a is None or self.b is None or self.slope is not None:
                raise ValueError("quad utility takes exactly `a` and `b`")
        return self

    def to_spec(self) -> UtilitySpec:
        if self.form == "linear":
            return UtilitySpec.linear_form(self.slope)
        return UtilitySpec.quad_form(self.a, self.b)

    @classmethod
    def from_spec(cls, spec: UtilitySpec) -> "UtilityFunctionModel":
        if spec.form == "linear":
            return cls(form="linear", slope=spec.slope)
        return cls(form="quad", a=spec.a, b=spec.b)


class UtilityEntryModel(_Model):
    target: UtilityFunctionModel
    source: UtilityFunctionModel


class RandomUtilitiesModel(_Model):
    """Uniform integer slopes drawn per edge, both sides, linear form."""

    low: int = 1
    high: int = 5
    seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        if self.low < 0 or self.high < self.low:
            raise ValueError("need 0 <= low <= high")
        return self


class UtilitiesModel(_Model):
    entries: list[UtilityEntryModel] | None = None
    random: RandomUtilitiesModel | None = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.entries is None) == (self.random is None):
            raise ValueError("provide exactly one of `entries` or `random`")
        return self


Bound = float | tuple[float, float]


class NetworkModel(_Model):
    n_targets: int = Field(ge=1)
    n_sources: int = Field(ge=1)
    complete: bool = False
    edges: list[tuple[int, int]] | None = None
    #: bare numbers mean an upper bound with the lower bound defaulting to 0
    target_bounds: list[Bound]
    source_bounds: list[Bound]

    @model_validator(mode="after")
    def _edges_or_complete(self):
        if self.complete == (self.edges is not None):
            raise ValueError("provide either `complete: true` or an `edges` list")
        return self


class SolveModel(_Model):
    eta: float = 1.0
    max_iters: int = 5000
    primal_tol: float = 1e-6
    dual_tol: float = 1e-6


class PrivacyModel(_Model):
    rho: float = 2.0
    eta: float = 1.0
    beta: float | list[float] | list[list[float]] = 1000.0
    iterations: int = 1000
    seed: int = 0


class Scenario(_Model):
    schema_version: Literal[1] = SCHEMA_VERSION
    description: str | None = None
    network: NetworkModel
    utilities: UtilitiesModel
    solve: SolveModel = SolveModel()
    privacy: PrivacyModel = PrivacyModel()


def _normalize_bounds(bounds: Sequence[Bound]) -> list[tuple[float, float]]:
    out = []
    for b in bounds:
        if isinstance(b, (int, float)):
            out.append((0.0, float(b)))
        else:
            out.append((float(b[0]), float(b[1])))
    return out


def build_domain_network(sc: Scenario) -> Network:
    nm = sc.network
    edges = complete_edges(nm.n_targets, nm.n_sources) if nm.complete else nm.edges
    try:
        return build_network(
            nm.n_targets,
            nm.n_sources,
            edges,
            _normalize_bounds(nm.target_bounds),
            _normalize_bounds(nm.source_bounds),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_domain_table(sc: Scenario, net: Network) -> UtilityTable:
    um = sc.utilities
    if um.entries is not None:
        if len(um.entries) != net.n_edges:
            raise ConfigError(
                f"{len(um.entries)} utility entries for {net.n_edges} edges"
            )
        table = UtilityTable(
            target=tuple(e.target.to_spec() for e in um.entries),
            source=tuple(e.source.to_spec() for e in um.entries),
        )
    else:
        r = um.random
        rng = np.random.default_rng(r.seed)
        delta = rng.integers(r.low, r.high + 1, net.n_edges).astype(float)
        gamma = rng.integers(r.low, r.high + 1, net.n_edges).astype(float)
        table = UtilityTable(
            target=tuple(UtilitySpec.linear_form(d) for d in delta),
            source=tuple(UtilitySpec.linear_form(g) for g in gamma),
        )
    try:
        table.validate_against(net)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return table


def build_solve_options(sc: Scenario, record_trace: bool = False) -> SolveOptions:
    sm = sc.solve
    try:
        return SolveOptions(
            eta=sm.eta, max_iters=sm.max_iters,
            primal_tol=sm.primal_tol, dual_tol=sm.dual_tol,
            record_trace=record_trace,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_privacy(
    sc: Scenario, beta: float | None = None, iterations: int | None = None
) -> PrivacyConfig:
    pm = sc.privacy
    try:
        return PrivacyConfig(
            rho=pm.rho,
            eta=pm.eta,
            beta=beta if beta is not None else _freeze_beta(pm.beta),
            iterations=iterations if iterations is not None else pm.iterations,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _freeze_beta(beta):
    if isinstance(beta, list):
        return tuple(tuple(b) if isinstance(b, list) else b for b in beta)
    return beta


def parse_scenario(data: dict | str | bytes) -> Scenario:
    """Validate a scenario from a dict or JSON text; unknown fields rejected."""
    try:
        if isinstance(data, (str, bytes)):
            return Scenario.model_validate_json(data)
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_scenario(text)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(scenario_json(sc))


def scenario_json(sc: Scenario) -> str:
    return json.dumps(sc.model_dump(exclude_none=True), indent=2) + "\n"


def generate_paper_scenario(
    seed: int, beta: float = 1000.0, iterations: int = 1000
) -> Scenario:
    """The bundled 4-source x 30-target case study.

    Complete bipartite network; target caps are uniform integers in [1, 5],
    source caps in [20, 40], all lower bounds 0 (the case-study description
    leaves them unstated; zero keeps every instance feasible). Linear
    utilities with integer slopes in [1, 5] on both sides; eta = 1, rho = 2.
    All draws are materialized so the scenario file is self-contained.
    """
    rng = np.random.default_rng(seed)
    n_targets, n_sources = 30, 4
    p_hi = rng.integers(1, 6, n_targets)
    q_hi = rng.integers(20, 41, n_sources)
    n_edges = n_targets * n_sources
    delta = rng.integers(1, 6, n_edges)
    gamma = rng.integers(1, 6, n_edges)
    entries = [
        UtilityEntryModel(
            target=UtilityFunctionModel(form="linear", slope=float(d)),
            source=UtilityFunctionModel(form="linear", slope=float(g)),
        )
        for d, g in zip(delta, gamma)
    ]
    return Scenario(
        description=f"case-study network (seed {seed})",
        network=NetworkModel(
            n_targets=n_targets,
            n_sources=n_sources,
            complete=True,
            target_bounds=[float(h) for h in p_hi],
            source_bounds=[float(h) for h in q_hi],
        ),
        utilities=UtilitiesModel(entries=entries),
        solve=SolveModel(eta=1.0),
        privacy=PrivacyModel(rho=2.0, eta=1.0, beta=beta, iterations=iterations, seed=seed),
    )

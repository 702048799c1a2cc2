"""Command-line client for the solver service.

The CLI is a thin HTTP client. By default it mounts the service in-process
(no server needed, fully reproducible); point it at a running server with
--server or the DPOT_SERVER environment variable. Result files are written
client-side as delimited-text artifacts.

Exit codes: 0 success, 2 infeasible scenario, 3 non-convergence,
4 configuration error.
"""

from __future__ import annotations

import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import httpx

from .results import Artifact, stats_artifact, write_artifact

EXIT_INFEASIBLE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_CONFIG = 4


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    # mount the service in-process: same request/response path as a live
    # server, no socket, fully reproducible
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    response = client.post(path, json=payload)
    if response.status_code == 409:
        detail = response.json().get("detail", {})
        raise CliFailure(
            EXIT_INFEASIBLE,
            f"infeasible: {detail.get('witness') or detail.get('message', '')}",
        )
    if response.status_code in (400, 422):
        detail = response.json().get("detail", "")
        raise CliFailure(EXIT_CONFIG, f"configuration rejected: {detail}")
    response.raise_for_status()
    return response.json()


def _load_scenario_payload(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliFailure(EXIT_CONFIG, f"cannot read scenario file: {exc}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliFailure(EXIT_CONFIG, f"scenario file is not valid JSON: {exc}")


def _timestamp(no_timestamp: bool) -> str | None:
    if no_timestamp:
        return None
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _out_dir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _trace_rows(trace: dict) -> list[tuple]:
    return [
        (k, u, p, d)
        for k, (u, p, d) in enumerate(
            zip(trace["social_utility"], trace["primal_residual"], trace["dual_residual"])
        )
    ]


def _plan_rows(edges: list, plan: list[float]) -> list[tuple]:
    return [
        (pos, int(edge[0]), int(edge[1]), float(amount))
        for pos, (edge, amount) in enumerate(zip(edges, plan))
    ]


server_option = click.option(
    "--server", envvar="DPOT_SERVER", default=None,
    help="Service URL; defaults to an in-process instance.",
)
scenario_option = click.option(
    "--scenario", "scenario_path", required=True, type=click.Path(), help="Scenario JSON file."
)
out_option = click.option("--out", default=".", help="Output directory.")
no_timestamp_option = click.option(
    "--no-timestamp", is_flag=True, help="Suppress timestamp header lines for byte-reproducible output."
)


@click.group()
def cli() -> None:
    """Transport-plan solver client."""


@cli.command("gen-scenario")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--beta", default=1000.0, type=float, show_default=True)
@click.option("--iters", default=1000, type=int, show_default=True)
@click.option("--out", default="scenario.json", help="Output file.", show_default=True)
@server_option
def gen_scenario(seed: int, beta: float, iters: int, out: str, server: str | None) -> None:
    """Generate the bundled 4x30 case-study scenario."""
    with _client(server) as client:
        data = _post(client, "/scenario/generate",
                     {"seed": seed, "beta": beta, "iterations": iters})
    path = Path(out)
    if path.is_dir():
        path = path / "scenario.json"
    path.write_text(json.dumps(data, indent=2) + "\n")
    click.echo(f"wrote {path}")


@cli.command()
@scenario_option
@out_option
@no_timestamp_option
@server_option
def solve(scenario_path: str, out: str, no_timestamp: bool, server: str | None) -> None:
    """Run the non-private solver and write plan + trace artifacts."""
    payload = {"scenario": _load_scenario_payload(scenario_path)}
    with _client(server) as client:
        data = _post(client, "/solve", payload)
    stamp = _timestamp(no_timestamp)
    out_path = _out_dir(out)
    write_artifact(Artifact("trace", _trace_rows(data["trace"]), stamp), out_path / "trace.csv")
    write_artifact(Artifact("plan", _plan_rows(data["edges"], data["plan"]), stamp),
                   out_path / "plan.csv")
    click.echo(
        f"status={data['status']} objective={data['objective']!r} "
        f"iterations={data['iterations']}"
    )
    if data["status"] != "converged":
        raise CliFailure(EXIT_NO_CONVERGENCE, "solver hit the iteration cap before converging")


@cli.command("dp-solve")
@scenario_option
@click.option("--beta", default=None, type=float, help="Override the scenario's beta.")
@click.option("--iters", default=None, type=int, help="Override the iteration count.")
@click.option("--seed", default=None, type=int, help="Override the noise master seed.")
@out_option
@no_timestamp_option
@server_option
def dp_solve(
    scenario_path: str, beta: float | None, iters: int | None, seed: int | None,
    out: str, no_timestamp: bool, server: str | None,
) -> None:
    """Run the perturbed solver; write trace, summary plan, and tail stats."""
    payload: dict = {"scenario": _load_scenario_payload(scenario_path)}
    if beta is not None:
        payload["beta"] = beta
    if iters is not None:
        payload["iterations"] = iters
    if seed is not None:
        payload["seed"] = seed
    with _client(server) as client:
        data = _post(client, "/dp-solve", payload)
    stamp = _timestamp(no_timestamp)
    out_path = _out_dir(out)
    write_artifact(Artifact("trace", _trace_rows(data["trace"]), stamp),
                   out_path / "dp_trace.csv")
    write_artifact(Artifact("plan", _plan_rows(data["edges"], data["summary_plan"]), stamp),
                   out_path / "dp_plan.csv")
    stats = {
        "beta": data["beta"],
        "iterations": data["iterations"],
        "seed": data["seed"],
        "tail_len": data["tail_len"],
        "summary_utility_tail_plan": data["summary_utility"],
        "tail_mean_utility": data["tail_mean_utility"],
        "tail_std": data["tail_std"],
        "plan_estimate": "mean consensus over final 10% of iterations",
    }
    write_artifact(stats_artifact(stats, stamp), out_path / "dp_stats.csv")
    click.echo(
        f"beta={data['beta']} summary_utility={data['summary_utility']!r} "
        f"tail_std={data['tail_std']!r}"
    )


@cli.command()
@scenario_option
@click.option("--beta-grid", required=True,
              help="Comma-separated privacy levels, e.g. 0.5,1,5,10,100,1000.")
@click.option("--seed", default=0, type=int, show_default=True,
              help="First noise seed of the sweep.")
@click.option("--runs", default=1, type=int, show_default=True,
              help="Number of consecutive seeds per beta.")
@out_option
@no_timestamp_option
@server_option
def sweep(
    scenario_path: str, beta_grid: str, seed: int, runs: int,
    out: str, no_timestamp: bool, server: str | None,
) -> None:
    """Run the (beta, seed) cross product and write one sweep row per cell."""
    try:
        grid = [float(x) for x in beta_grid.split(",") if x.strip()]
    except ValueError as exc:
        raise CliFailure(EXIT_CONFIG, f"bad beta grid: {exc}")
    if not grid or runs < 1:
        raise CliFailure(EXIT_CONFIG, "need a nonempty beta grid and runs >= 1")
    payload = {
        "scenario": _load_scenario_payload(scenario_path),
        "beta_grid": grid,
        "seeds": list(range(seed, seed + runs)),
    }
    with _client(server) as client:
        data = _post(client, "/sweep", payload)
    rows = [
        (r["beta"], r["seed"], r["dp_utility"], r["nonprivate_utility"],
         r["oracle_utility"], r["tail_std"], r.get("error", ""))
        for r in data["rows"]
    ]
    out_path = _out_dir(out)
    write_artifact(Artifact("sweep", rows, _timestamp(no_timestamp)), out_path / "sweep.csv")
    failures = sum(1 for r in rows if r[6])
    click.echo(f"wrote {len(rows)} sweep rows ({failures} failed cells)")


@cli.command()
@scenario_option
@click.option("--beta", default=None, type=float, help="Override the scenario's beta.")
@click.option("--seed", default=None, type=int, help="Override the noise master seed.")
@out_option
@no_timestamp_option
@server_option
def compare(
    scenario_path: str, beta: float | None, seed: int | None,
    out: str, no_timestamp: bool, server: str | None,
) -> None:
    """Per-target received amounts: centralized oracle vs solver vs private run."""
    payload: dict = {"scenario": _load_scenario_payload(scenario_path)}
    if beta is not None:
        payload["beta"] = beta
    if seed is not None:
        payload["seed"] = seed
    with _client(server) as client:
        data = _post(client, "/compare", payload)
    rows = [
        (r["target"], r["oracle_total"], r["admm_total"], r["dp_total"])
        for r in data["rows"]
    ]
    out_path = _out_dir(out)
    write_artifact(Artifact("compare", rows, _timestamp(no_timestamp)),
                   out_path / "compare.csv")
    click.echo(
        f"oracle={data['oracle_objective']!r} solver={data['admm_objective']!r} "
        f"dp={data['dp_summary_objective']!r}"
    )


@cli.command()
@scenario_option
@click.option("--trials", default=200, type=int, show_default=True)
@click.option("--seed", default=None, type=int)
@out_option
@no_timestamp_option
@server_option
def audit(
    scenario_path: str, trials: int, seed: int | None,
    out: str, no_timestamp: bool, server: str | None,
) -> None:
    """Sensitivity, density-ratio, and slope-bound audits for a scenario."""
    payload: dict = {"scenario": _load_scenario_payload(scenario_path), "trials": trials}
    if seed is not None:
        payload["seed"] = seed
    with _client(server) as client:
        data = _post(client, "/audit", payload)
    out_path = _out_dir(out)
    write_artifact(stats_artifact(dict(data), _timestamp(no_timestamp)),
                   out_path / "audit.csv")
    click.echo(
        "slope_bound="
        + ("ok" if data["slope_bound_ok"] else f"{data['slope_violations']} violations")
        + f" sensitivity_max={data['sensitivity_config_max']!r}"
        + f" bound={data['sensitivity_config_bound']!r}"
        + f" calibrated_ratio_ok={data['ratio_calibrated_ok']}"
        + f" inverted_ratio_ok={data['ratio_inverted_ok']}"
    )


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, type=int, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the solver service with uvicorn."""
    import uvicorn

    uvicorn.run("dpot.service.app:app", host=host, port=port)


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except CliFailure as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.code)
    except click.UsageError as exc:
        exc.show()
        sys.exit(EXIT_CONFIG)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_CONFIG)
    except click.Abort:
        sys.exit(EXIT_CONFIG)
    except httpx.HTTPError as exc:
        click.echo(f"transport error: {exc}", err=True)
        sys.exit(1)
    return 0


if __name__ == "__main__":
    sys.exit(main())

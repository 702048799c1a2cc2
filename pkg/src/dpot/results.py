"""Delimited-text result artifacts: traces, plans, sweeps, comparisons.

One file per artifact. Every file starts with a kind/version comment line,
optionally a timestamp comment (suppressible for byte-reproducible runs),
then a CSV header and rows. Floats are serialized with repr, so
write -> read -> write reproduces the file byte for byte. Parsers reject
unknown artifact kinds and mismatched columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

_MAGIC = "# dpot-artifact:"

#: column names and cell types per artifact kind
SCHEMAS: dict[str, tuple[tuple[str, type], ...]] = {
    "trace": (
        ("iteration", int),
        ("social_utility", float),
        ("primal_residual", float),
        ("dual_residual", float),
    ),
    "plan": (
        ("edge", int),
        ("target", int),
        ("source", int),
        ("amount", float),
    ),
    "sweep": (
        ("beta", float),
        ("seed", int),
        ("dp_utility", float),
        ("nonprivate_utility", float),
        ("oracle_utility", float),
        ("tail_std", float),
        ("error", str),
    ),
    "compare": (
        ("target", int),
        ("oracle_total", float),
        ("admm_total", float),
        ("dp_total", float),
    ),
    "stats": (
        ("key", str),
        ("value", str),
    ),
}


class ArtifactFormatError(ValueError):
    """The file is not a well-formed artifact of the expected kind."""


@dataclass
class Artifact:
    kind: str
    rows: list[tuple]
    generated: str | None = None

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(name for name, _ in SCHEMAS[self.kind])


def _cell_to_text(value, typ) -> str:
    if value is None:
        return ""
    if typ is float:
        return repr(float(value))
    if typ is int:
        return str(int(value))
    text = str(value)
    if any(ch in text for ch in ",\n\r"):
        # cells never need quoting in this format; flatten instead
        text = text.replace(",", ";").replace("\n", " ").replace("\r", " ")
    return text


def _cell_from_text(text: str, typ):
    if text == "" and typ is not str:
        return None
    if typ is float:
        return float(text)
    if typ is int:
        return int(text)
    return text


def render_artifact(artifact: Artifact) -> str:
    if artifact.kind not in SCHEMAS:
        raise ArtifactFormatError(f"unknown artifact kind {artifact.kind!r}")
    schema = SCHEMAS[artifact.kind]
    lines = [f"{_MAGIC} {artifact.kind} v1"]
    if artifact.generated is not None:
        lines.append(f"# generated: {artifact.generated}")
    lines.append(",".join(name for name, _ in schema))
    for row in artifact.rows:
        if len(row) != len(schema):
            raise ArtifactFormatError(
                f"row has {len(row)} cells, schema {artifact.kind} has {len(schema)}"
            )
        lines.append(",".join(_cell_to_text(v, t) for v, (_, t) in zip(row, schema)))
    return "\n".join(lines) + "\n"


def write_artifact(artifact: Artifact, path) -> Path:
    path = Path(path)
    path.write_text(render_artifact(artifact))
    return path


def parse_artifact(text: str, expected_kind: str | None = None) -> Artifact:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(_MAGIC):
        raise ArtifactFormatError("missing artifact marker line")
    head = lines[0][len(_MAGIC):].strip().split()
    if len(head) != 2 or head[1] != "v1":
        raise ArtifactFormatError(f"bad artifact header {lines[0]!r}")
    kind = head[0]
    if kind not in SCHEMAS:
        raise ArtifactFormatError(f"unknown artifact kind {kind!r}")
    if expected_kind is not None and kind != expected_kind:
        raise ArtifactFormatError(f"expected {expected_kind} artifact, found {kind}")
    schema = SCHEMAS[kind]
    pos = 1
    generated = None
    if pos < len(lines) and lines[pos].startswith("# generated:"):
        generated = lines[pos][len("# generated:"):].strip()
        pos += 1
    if pos >= len(lines):
        raise ArtifactFormatError("missing column header")
    header = tuple(lines[pos].split(","))
    expected_header = tuple(name for name, _ in schema)
    if header != expected_header:
        raise ArtifactFormatError(
            f"column mismatch: expected {expected_header}, found {header}"
        )
    rows = []
    for line in lines[pos + 1:]:
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(schema):
            raise ArtifactFormatError(f"row width mismatch in line {line!r}")
        rows.append(tuple(_cell_from_text(c, t) for c, (_, t) in zip(cells, schema)))
    return Artifact(kind=kind, rows=rows, generated=generated)


def read_artifact(path, expected_kind: str | None = None) -> Artifact:
    return parse_artifact(Path(path).read_text(), expected_kind)


def trace_artifact(trace, generated: str | None = None) -> Artifact:
    rows = [
        (k, u, p, d)
        for k, (u, p, d) in enumerate(
            zip(trace.social_utility, trace.primal_residual, trace.dual_residual)
        )
    ]
    return Artifact(kind="trace", rows=rows, generated=generated)


def plan_artifact(net, plan, generated: str | None = None) -> Artifact:
    rows = [
        (pos, edge.target, edge.source, float(plan[pos]))
        for pos, edge in enumerate(net.edges)
    ]
    return Artifact(kind="plan", rows=rows, generated=generated)


def stats_artifact(stats: dict, generated: str | None = None) -> Artifact:
    rows = [(key, _stat_text(value)) for key, value in stats.items()]
    return Artifact(kind="stats", rows=rows, generated=generated)


def _stat_text(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)

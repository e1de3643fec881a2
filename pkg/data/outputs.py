"""
Output writers for trajectories, breakdowns, bound reports and sweeps.
Every file carries a schema line and the resolved run configuration as
`#` comments, and is written atomically.
"""

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np
import structlog

from core.current_decomposition import ActionBreakdown, RateProfile
from core.linear_langevin import MomentTrajectory
from .models import BoundReport, CheckOutcome, SweepRow

logger = structlog.get_logger()

TRAJECTORY_SCHEMA = "trajectory/v1"
BREAKDOWN_SCHEMA = "breakdown/v1"
BOUNDS_SCHEMA = "bounds/v2"
FIG1_SCHEMA = "fig1/v1"


def atomic_write_text(path: Path, text: str) -> Path:
    """
    Write `text` to `path` through a temporary file in the same directory.

    Returns:
        Path: the final path

    Raises:
        OSError: If the directory cannot be created or the rename fails
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except OSError as e:
        logger.error("output_write_failed", path=str(path), error=str(e))
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info("output_written", path=str(path), bytes=len(text.encode("utf-8")))
    return path


def fmt(x: Any) -> str:
    """Shortest round-trip text for floats; plain str for everything else."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _flatten(config: Mapping[str, Any], prefix: str = "") -> list[tuple[str, Any]]:
    items = []
    for key in sorted(config):
        value = config[key]
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            items.extend(_flatten(value, f"{name}."))
        else:
            items.append((name, value))
    return items


def header_lines(schema: str, config: Optional[Mapping[str, Any]]) -> list[str]:
    lines = [f"# schema: {schema}"]
    for key, value in _flatten(config or {}):
        if value is None:
            continue
        lines.append(f"# {key} = {json.dumps(value) if isinstance(value, (list, tuple, str, bool)) else fmt(value)}")
    return lines


def render_csv(schema: str, header: Sequence[str], rows: Iterable[Sequence[Any]], config: Optional[Mapping] = None) -> str:
    buffer = io.StringIO()
    for line in header_lines(schema, config):
        buffer.write(line + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buffer.getvalue()


def _coordinate_names(n: int) -> list[str]:
    return ["x", "v"] if n == 2 else [str(i) for i in range(n)]


def trajectory_columns(n: int) -> list[str]:
    names = _coordinate_names(n)
    cols = ["t"] + [f"mu_{a}" for a in names]
    cols += [f"S_{names[i]}{names[j]}" for i in range(n) for j in range(i, n)]
    return cols + ["sigma_rate", "y_rate", "phi_rate"]


def trajectory_csv(
    trajectory: MomentTrajectory,
    rates: RateProfile,
    config: Optional[Mapping] = None,
    si: bool = False,
) -> str:
    """Per-time means, upper-triangle covariances and action rates (k_B units unless `si`)."""
    n = trajectory.system.n
    unit = 1.0 if si else trajectory.system.k_B
    iu = np.triu_indices(n)
    rows = (
        [t, *mu, *S[iu], s / unit, y / unit, p / unit]
        for t, mu, S, s, y, p in zip(
            trajectory.times, trajectory.means, trajectory.covs, rates.sigma, rates.y, rates.phi
        )
    )
    return render_csv(TRAJECTORY_SCHEMA, trajectory_columns(n), rows, config)


def breakdown_csv(breakdown: ActionBreakdown, config: Optional[Mapping] = None, si: bool = False) -> str:
    data = breakdown.as_dict(si=si)
    data["notes"] = " | ".join(data["notes"])
    columns = list(data)
    return render_csv(BREAKDOWN_SCHEMA, columns, [[data[c] for c in columns]], config)


def bounds_jsonl(reports: Iterable[BoundReport], config: Optional[Mapping] = None) -> str:
    """First line identifies the schema and config, then one report per line (SI units)."""
    lines = [json.dumps({"schema": BOUNDS_SCHEMA, "units": "SI", "config": config or {}}, sort_keys=True, default=str)]
    lines += [r.model_dump_json() for r in reports]
    return "\n".join(lines) + "\n"


def sweep_csv(rows: Iterable[SweepRow], config: Optional[Mapping] = None) -> str:
    """gamma_over_m,tau24,tau25,tau_actual; failed points carry NaN bounds."""
    return render_csv(
        FIG1_SCHEMA,
        ["gamma_over_m", "tau24", "tau25", "tau_actual"],
        ([r.gamma_over_m, r.tau24, r.tau25, r.tau_actual] for r in rows),
        config,
    )


def bounds_table(reports: Sequence[BoundReport]) -> str:
    """Fixed-width console summary of evaluated bounds."""
    width = max([len(r.label) for r in reports] + [5])
    lines = [f"{'bound'.ljust(width)}  result  {'lhs':>12}  {'rhs':>12}  {'slack':>12}", "-" * (width + 50)]
    for r in reports:
        status = "OK" if r.satisfied else "VIOL"
        lines.append(f"{r.label.ljust(width)}  {status:<6}  {r.lhs:12.5g}  {r.rhs:12.5g}  {r.slack:12.5g}")
    violated = sum(not r.satisfied for r in reports)
    lines.append(f"{len(reports) - violated}/{len(reports)} bounds satisfied")
    return "\n".join(lines) + "\n"


def check_table(outcomes: Sequence[CheckOutcome]) -> str:
    """Fixed-width pass/fail table for the console."""
    width = max([len(f"{o.suite}.{o.name}") for o in outcomes] + [9])
    lines = [f"{'invariant'.ljust(width)}  result  worst", "-" * (width + 22)]
    for o in outcomes:
        worst = "" if o.worst is None else f"{o.worst:.3g}"
        status = "PASS" if o.passed else "FAIL"
        line = f"{f'{o.suite}.{o.name}'.ljust(width)}  {status:<6}  {worst}"
        if o.detail and not o.passed:
            line += f"  ({o.detail})"
        lines.append(line)
    failed = sum(not o.passed for o in outcomes)
    lines.append(f"{len(outcomes) - failed}/{len(outcomes)} invariants passed")
    return "\n".join(lines) + "\n"

"""JSON and CSV report writers with run provenance."""

from __future__ import annotations

import csv
import io
import json
import math
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, TextIO

import click
import numpy as np

from fracmem import __version__
from fracmem.gagliardo import QuadraticForm
from fracmem.grid import Field
from fracmem.rearrange import SymmetrizedField

FORMATS = ("json", "csv", "both")


def provenance(command: str, seed: Optional[int], config: Mapping[str, Any]) -> dict:
    """Block recorded in every report: tool version, command, seed, resolved configuration and timestamp."""
    return {
        "tool": "fracmem",
        "version": __version__,
        "command": command,
        "seed": seed,
        "generated": datetime.now(timezone.utc).isoformat(),
        "config": jsonable(dict(config)),
    }


def jsonable(value: Any) -> Any:
    """Convert numpy scalars and arrays, tuples and paths into JSON-ready values."""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (datetime, date)):
        return value.isoformat()
    return value


def dumps(report: Mapping[str, Any]) -> str:
    return json.dumps(jsonable(report), indent=2)


def write_csv(stream: TextIO, rows: Sequence[Mapping[str, Any]], seed: Optional[int]) -> None:
    """
    Write rows as CSV preceded by two comment lines (timestamp, version and seed).

    Floats are written with ``repr`` so that values round-trip exactly.
    """
    stream.write(f"# generated {datetime.now(timezone.utc).isoformat()}\n")
    stream.write(f"# fracmem {__version__} seed={seed}\n")
    if not rows:
        return
    header = list(rows[0].keys())
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(row.get(key)) for key in header])


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return " ".join(_cell(v) for v in value)
    if value is None:
        return ""
    return str(value)


def emit(
    report: Mapping[str, Any],
    rows: Sequence[Mapping[str, Any]],
    output: Optional[Path],
    fmt: str,
    seed: Optional[int],
) -> list[Path]:
    """
    Write a report as JSON and/or CSV.

    Without ``output`` the JSON (or CSV for ``fmt == "csv"``) goes to stdout.

    Returns:
        Paths written.
    """
    if fmt not in FORMATS:
        raise click.UsageError(f"format must be one of {', '.join(FORMATS)}")
    written: list[Path] = []
    if output is None:
        if fmt == "csv":
            buffer = io.StringIO()
            write_csv(buffer, rows, seed)
            click.echo(buffer.getvalue(), nl=False)
        else:
            click.echo(dumps(report))
        return written
    output.parent.mkdir(parents=True, exist_ok=True)
    if fmt in ("json", "both"):
        path = output.with_suffix(".json")
        path.write_text(dumps(report) + "\n")
        written.append(path)
    if fmt in ("csv", "both"):
        path = output.with_suffix(".csv")
        with open(path, "w", newline="") as f:
            write_csv(f, rows, seed)
        written.append(path)
    return written


def field_rows(field: Field, name: str = "value") -> list[dict]:
    """One row per cell: integer index, centre coordinates and value."""
    centres = field.grid.centers(field.mask.cells)
    rows = []
    for cell, centre, value in zip(field.mask.cells, centres, field.values):
        row: dict[str, Any] = {f"i{a}": int(c) for a, c in enumerate(cell)}
        row.update({f"x{a}": float(x) for a, x in enumerate(centre)})
        row[name] = float(value)
        rows.append(row)
    return rows


def symmetrized_rows(sym: SymmetrizedField) -> list[dict]:
    """Rows of a symmetrized field with the radial rank of each cell (0 nearest the origin)."""
    rank = np.empty(len(sym.ordering), dtype=np.int64)
    rank[sym.ordering] = np.arange(len(sym.ordering))
    rows = field_rows(sym.field)
    for row, r in zip(rows, rank):
        value = row.pop("value")
        row["radial_rank"] = int(r)
        row["value"] = value
    return rows


def form_rows(form: QuadraticForm) -> Iterable[dict]:
    """Pair weights ``(i, j, w_ij)`` followed by tails as ``(i, i, t_i)``."""
    for i, j, w in form.rows():
        yield {"i": i, "j": j, "weight": w}


def dump_form_csv(form: QuadraticForm, path: Path) -> None:
    """Write the assembled pair weights and tails of a form to a CSV file."""
    with open(path, "w", newline="") as f:
        write_csv(f, list(form_rows(form)), None)

"""Rearrangements of a field and the associated rearrangement inequalities."""

from pathlib import Path
from typing import Optional

import click

from fracmem.gagliardo import FormSpec
from fracmem.rearrange import (
    KINDS,
    decreasing_rearrangement,
    hardy_littlewood_check,
    increasing_rearrangement,
    polya_szego_check,
    schwarz_decreasing,
    schwarz_increasing,
)
from fracmem.reports import emit, provenance, symmetrized_rows, write_csv
from fracmem.utils import cli_errors, load_field, output_options, print_summary, resolve, settings_from


@click.command()
@click.option(
    "--field",
    "field_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Field file",
)
@click.option("--kind", type=click.Choice(KINDS), default="decreasing", show_default=True)
@click.option(
    "--with",
    "other_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Second field on the same mask for the Hardy-Littlewood check",
)
@click.option("--polya-szego", is_flag=True, help="Also compare seminorms of the field and its symmetrization")
@click.option("--s", "s", type=float, help="Fractional order used by --polya-szego")
@click.option(
    "--symmetrized",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Write the symmetrized field to this CSV file",
)
@output_options
@click.pass_context
def rearrange(
    ctx: click.Context,
    field_path: Path,
    kind: str,
    other_path: Optional[Path],
    polya_szego: bool,
    s: Optional[float],
    symmetrized: Optional[Path],
    output: Optional[Path],
    fmt: Optional[str],
) -> None:
    """Tabulate a one-dimensional rearrangement and symmetrize the field."""
    opts = resolve(settings_from(ctx), s=s, format=fmt)
    with cli_errors():
        f = load_field(field_path)
        profile = decreasing_rearrangement(f) if kind == "decreasing" else increasing_rearrangement(f)
        sym = schwarz_decreasing(f) if kind == "decreasing" else schwarz_increasing(f)
        result = {
            "kind": kind,
            "cells": f.mask.count,
            "measure": f.mask.measure,
            "profile_max": float(profile.values.max()),
            "profile_min": float(profile.values.min()),
            "symmetrized_cells": sym.field.mask.count,
        }
        if other_path:
            lhs, rhs = hardy_littlewood_check(f, load_field(other_path))
            result["hardy_littlewood"] = {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs + 1e-12 * abs(rhs)}
        if polya_szego:
            spec = FormSpec(s=float(opts["s"]), dim=f.grid.dim, near_policy=opts["near_policy"])
            q_star, q = polya_szego_check(f, spec)
            result["polya_szego"] = {"symmetrized": q_star, "original": q, "holds": q_star <= q}

    if symmetrized:
        with open(symmetrized, "w", newline="") as stream:
            write_csv(stream, symmetrized_rows(sym), None)
    params = {**opts, "field": field_path, "kind": kind, "with": other_path, "polya_szego": polya_szego}
    report = {"provenance": provenance("rearrange", None, params), "result": result}
    written = emit(report, profile.rows(), output, opts["format"], None)
    if output is not None:
        print_summary("Rearrangement", {k: v for k, v in result.items() if not isinstance(v, dict)}, written)

"""Smallest eigenpair of the composite-membrane operator on one domain."""

from pathlib import Path
from typing import Optional

import click

from fracmem.eigensolve import smallest_eigenpair
from fracmem.gagliardo import FormSpec, assemble_form
from fracmem.reports import dump_form_csv, emit, field_rows, provenance
from fracmem.utils import (
    cli_errors,
    load_domain,
    load_subset,
    output_options,
    print_summary,
    resolve,
    settings_from,
    solver_options,
)


@click.command()
@click.option(
    "--domain",
    "-d",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Domain file (JSON or YAML)",
)
@click.option("--alpha", type=float, default=0.0, show_default=True, help="Potential height")
@click.option(
    "--potential",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Shape file of the potential set (intersected with the domain)",
)
@click.option("--h", type=float, help="Override the grid spacing of the domain file")
@click.option("--tail-policy", type=click.Choice(["grid", "domain"]), help="How the tail radius is chosen")
@click.option(
    "--dump-form",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Also write the assembled pair weights and tails as CSV",
)
@solver_options
@output_options
@click.pass_context
def eig(
    ctx: click.Context,
    domain: Path,
    alpha: float,
    potential: Optional[Path],
    h: Optional[float],
    tail_policy: Optional[str],
    dump_form: Optional[Path],
    s: Optional[float],
    tol: Optional[float],
    near_policy: Optional[str],
    output: Optional[Path],
    fmt: Optional[str],
) -> None:
    """
    Compute the smallest eigenpair on a domain.

    Without --potential (or with --alpha 0) this is the first Dirichlet
    eigenvalue of the fractional Laplacian.
    """
    opts = resolve(settings_from(ctx), s=s, tol=tol, near_policy=near_policy, tail_policy=tail_policy, format=fmt)
    with cli_errors():
        _, mask = load_domain(domain, h)
        subset = load_subset(potential, mask) if potential else None
        spec = FormSpec(
            s=float(opts["s"]), dim=mask.grid.dim, near_policy=opts["near_policy"], tail_policy=opts["tail_policy"]
        )
        form = assemble_form(mask.grid, mask, spec)
        pair = smallest_eigenpair(form, subset, alpha, float(opts["tol"]))
        if dump_form:
            dump_form_csv(form, dump_form)

    result = pair.to_dict()
    result.update(
        {
            "measure": mask.measure,
            "alpha": alpha,
            "potential_cells": subset.count if subset is not None else 0,
            "C_Ns": form.C_Ns,
            "diagonal": form.diagonal,
            "tail_radius": form.tail_radius,
        }
    )
    params = {**opts, "domain": domain, "potential": potential, "alpha": alpha, "h": mask.grid.h}
    report = {"provenance": provenance("eig", None, params), "result": result}
    written = emit(report, field_rows(pair.vector, "u"), output, opts["format"], None)
    if output is not None:
        print_summary("Eigenpair", {"lambda": pair.lam, "residual": pair.residual, "cells": mask.count}, written)

"""Composite-membrane optimization on one domain."""

from pathlib import Path
from typing import Optional

import click

from fracmem.gagliardo import FormSpec, assemble_form
from fracmem.membrane import TIE_RULES, MembraneConfig
from fracmem.membrane import optimize as run_optimize
from fracmem.reports import emit, field_rows, provenance
from fracmem.utils import (
    cli_errors,
    load_domain,
    output_options,
    print_summary,
    resolve,
    search_options,
    settings_from,
    solver_options,
)


def measure_from(c: Optional[float], c_fraction: Optional[float], total: float) -> float:
    """Absolute potential measure from either ``--c`` or ``--c-fraction``."""
    if (c is None) == (c_fraction is None):
        raise click.UsageError("give exactly one of --c and --c-fraction")
    return float(c) if c is not None else float(c_fraction) * total


@click.command()
@click.option(
    "--domain",
    "-d",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Domain file (JSON or YAML)",
)
@click.option("--alpha", type=float, required=True, help="Potential height")
@click.option("--c", "c", type=float, help="Potential measure")
@click.option("--c-fraction", type=float, help="Potential measure as a fraction of |Omega|")
@click.option("--h", type=float, help="Override the grid spacing of the domain file")
@click.option("--max-outer", type=int, help="Cap on alternating rounds per start")
@click.option("--tie-rule", type=click.Choice(TIE_RULES), default="lexicographic", show_default=True)
@solver_options
@search_options
@output_options
@click.pass_context
def optimize(
    ctx: click.Context,
    domain: Path,
    alpha: float,
    c: Optional[float],
    c_fraction: Optional[float],
    h: Optional[float],
    max_outer: Optional[int],
    tie_rule: str,
    s: Optional[float],
    tol: Optional[float],
    near_policy: Optional[str],
    starts: Optional[int],
    seed: Optional[int],
    threads: Optional[int],
    output: Optional[Path],
    fmt: Optional[str],
) -> None:
    """Minimize the composite-membrane eigenvalue over potential sets of measure c."""
    opts = resolve(
        settings_from(ctx),
        s=s,
        tol=tol,
        near_policy=near_policy,
        starts=starts,
        seed=seed,
        threads=threads,
        max_outer=max_outer,
        format=fmt,
    )
    with cli_errors():
        _, mask = load_domain(domain, h)
        measure = measure_from(c, c_fraction, mask.measure)
        spec = FormSpec(s=float(opts["s"]), dim=mask.grid.dim, near_policy=opts["near_policy"])
        form = assemble_form(mask.grid, mask, spec)
        config = MembraneConfig(
            alpha=alpha,
            c=measure,
            starts=int(opts["starts"]),
            seed=int(opts["seed"]),
            tol=float(opts["tol"]),
            max_outer=int(opts["max_outer"]),
            tie_rule=tie_rule,
            threads=int(opts["threads"]),
        )
        result = run_optimize(form, config)

    in_d = set(map(tuple, result.D.cells.tolist()))
    rows = field_rows(result.u, "u")
    for row, cell in zip(rows, result.u.mask.cells.tolist()):
        row["in_D"] = int(tuple(cell) in in_d)
    params = {**opts, "domain": domain, "alpha": alpha, "c": measure, "tie_rule": tie_rule, "h": mask.grid.h}
    report = {"provenance": provenance("optimize", config.seed, params), "result": result.to_dict()}
    written = emit(report, rows, output, opts["format"], config.seed)
    if output is not None:
        print_summary(
            "Composite membrane",
            {"Lambda": result.value, "c": result.c_snapped, "start": result.start_id, "converged": result.converged},
            written,
        )

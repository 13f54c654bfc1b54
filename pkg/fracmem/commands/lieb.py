"""Lieb-type intersection experiment for two domains."""

from pathlib import Path
from typing import Optional

import click

from fracmem.inequalities import lieb_experiment
from fracmem.reports import emit, provenance
from fracmem.utils import (
    cli_errors,
    load_domain,
    output_options,
    parse_shifts,
    print_summary,
    resolve,
    search_options,
    settings_from,
    solver_options,
)

_ROW_KEYS = (
    "overlap", "c_x", "c", "admissible", "Lambda_intersection", "strict", "lambda_dirichlet", "Lambda_full", "U", "W"
)


@click.command()
@click.option("--domain1", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--domain2", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--alpha1", type=float, required=True, help="Potential height on the first domain")
@click.option("--alpha2", type=float, required=True, help="Potential height on the second domain")
@click.option("--c1", type=float, required=True, help="Potential measure on the first domain")
@click.option("--c2", type=float, required=True, help="Potential measure on the second domain")
@click.option("--alpha", type=float, help="Height on intersections (default (alpha1+alpha2)/2)")
@click.option(
    "--c-fraction",
    type=float,
    default=0.5,
    show_default=True,
    help="Measure on each intersection as a fraction of |D1 ∩ (D2 + x)|",
)
@click.option("--shifts", help="Shifts to evaluate, e.g. '0:0;1:0' (default: all with overlap)")
@click.option("--stride", type=int, default=1, show_default=True, help="Keep shifts whose components are multiples")
@click.option("--shift-starts", type=int, help="Multi-start count on intersections (default --starts)")
@solver_options
@search_options
@output_options
@click.pass_context
def lieb(
    ctx: click.Context,
    domain1: Path,
    domain2: Path,
    alpha1: float,
    alpha2: float,
    c1: float,
    c2: float,
    alpha: Optional[float],
    c_fraction: float,
    shifts: Optional[str],
    stride: int,
    shift_starts: Optional[int],
    s: Optional[float],
    tol: Optional[float],
    near_policy: Optional[str],
    starts: Optional[int],
    seed: Optional[int],
    threads: Optional[int],
    output: Optional[Path],
    fmt: Optional[str],
) -> None:
    """Look for translates whose intersection beats the sum of the two optimal values."""
    opts = resolve(
        settings_from(ctx), s=s, tol=tol, near_policy=near_policy, starts=starts, seed=seed, threads=threads, format=fmt
    )
    with cli_errors():
        _, omega1 = load_domain(domain1)
        _, omega2 = load_domain(domain2)
        result = lieb_experiment(
            omega1,
            omega2,
            alpha1,
            alpha2,
            c1,
            c2,
            float(opts["s"]),
            alpha,
            c_fraction,
            parse_shifts(shifts) if shifts else None,
            stride=stride,
            starts=int(opts["starts"]),
            shift_starts=shift_starts,
            seed=int(opts["seed"]),
            tol=float(opts["tol"]),
            threads=int(opts["threads"]),
            near_policy=opts["near_policy"],
        )

    rows = []
    for rec in result.records:
        row = {f"k{a}": v for a, v in enumerate(rec.shift)}
        row.update({key: getattr(rec, key) for key in _ROW_KEYS})
        rows.append(row)
    params = {
        **opts, "domain1": domain1, "domain2": domain2, "c_fraction": c_fraction, "shifts": shifts, **result.config
    }
    report = {"provenance": provenance("lieb", int(opts["seed"]), params), "result": result.to_dict()}
    written = emit(report, rows, output, opts["format"], int(opts["seed"]))
    if output is not None:
        print_summary(
            "Lieb intersection",
            {
                "Lambda_sum": result.Lambda_sum,
                "shifts": len(result.records),
                "witnesses": len(result.witnesses),
                "WU integral": result.wu_integral,
            },
            written,
        )

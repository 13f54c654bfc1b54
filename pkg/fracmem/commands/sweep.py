"""Parameter sweeps: monotonicity of the optimal value and grid refinement."""

from pathlib import Path
from typing import Optional

import click

from fracmem.convergence import dirichlet_refinement_study
from fracmem.gagliardo import FormSpec, assemble_form
from fracmem.membrane import MembraneConfig, monotonicity_sweep
from fracmem.reports import emit, provenance
from fracmem.utils import (
    cli_errors,
    load_document,
    load_domain,
    output_options,
    parse_numbers,
    print_summary,
    resolve,
    search_options,
    settings_from,
    solver_options,
)


@click.command()
@click.option(
    "--kind",
    type=click.Choice(["monotonicity", "refinement"]),
    default="monotonicity",
    show_default=True,
    help="Sweep over (alpha, c) or over grid spacings",
)
@click.option(
    "--domain",
    "-d",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Domain file (JSON or YAML)",
)
@click.option("--alphas", help="Comma separated increasing potential heights (monotonicity)")
@click.option("--cs", help="Comma separated increasing potential measures (monotonicity)")
@click.option("--hs", help="Comma separated spacings, coarse to fine, e.g. 1/32,1/64 (refinement)")
@solver_options
@search_options
@output_options
@click.pass_context
def sweep(
    ctx: click.Context,
    kind: str,
    domain: Path,
    alphas: Optional[str],
    cs: Optional[str],
    hs: Optional[str],
    s: Optional[float],
    tol: Optional[float],
    near_policy: Optional[str],
    starts: Optional[int],
    seed: Optional[int],
    threads: Optional[int],
    output: Optional[Path],
    fmt: Optional[str],
) -> None:
    """Run a monotonicity table or a Dirichlet refinement study."""
    opts = resolve(
        settings_from(ctx), s=s, tol=tol, near_policy=near_policy, starts=starts, seed=seed, threads=threads, format=fmt
    )
    with cli_errors():
        if kind == "monotonicity":
            if not alphas or not cs:
                raise click.UsageError("--kind monotonicity needs --alphas and --cs")
            _, mask = load_domain(domain)
            form = assemble_form(
                mask.grid, mask, FormSpec(s=float(opts["s"]), dim=mask.grid.dim, near_policy=opts["near_policy"])
            )
            alpha_list, c_list = parse_numbers(alphas), parse_numbers(cs)
            config = MembraneConfig(
                alpha=max(alpha_list),
                c=min(c_list),
                starts=int(opts["starts"]),
                seed=int(opts["seed"]),
                tol=float(opts["tol"]),
                threads=int(opts["threads"]),
            )
            table = monotonicity_sweep(form, alpha_list, c_list, config)
            rows = table.rows()
            result = {"monotone": table.monotone, "violations": list(table.violations), "rows": rows}
            summary = {"entries": len(rows), "monotone": table.monotone}
        else:
            if not hs:
                raise click.UsageError("--kind refinement needs --hs")
            study = dirichlet_refinement_study(
                load_document(domain),
                parse_numbers(hs),
                float(opts["s"]),
                near_policy=opts["near_policy"],
                tol=float(opts["tol"]),
            )
            rows = list(study.rows)
            result = study.to_dict()
            summary = {"levels": len(rows), "extrapolated": study.extrapolated, "order": study.order}

    params = {**opts, "kind": kind, "domain": domain, "alphas": alphas, "cs": cs, "hs": hs}
    report = {"provenance": provenance(f"sweep-{kind}", int(opts["seed"]), params), "result": result}
    written = emit(report, rows, output, opts["format"], int(opts["seed"]))
    if output is not None:
        print_summary(f"Sweep ({kind})", summary, written)

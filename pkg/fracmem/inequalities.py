"""
Experiment harnesses for the isoperimetric statements about composite membranes.

* Faber–Krahn: the quasi-ball of the same measure does at least as well as the domain.
* Lieb: some translate of two domains has an intersection whose optimal value
  falls below the sum of the two optimal values.
* Product identity: shift-integrated seminorm of ``u1(y) u2(y - x)`` split into
  the three terms of the Fubini argument.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping, Sequence, Union

import numpy as np
from joblib import Parallel, delayed
from scipy.signal import fftconvolve

from fracmem.eigensolve import DEFAULT_TOL, smallest_eigenpair
from fracmem.errors import EmptyReportError, ParameterError
from fracmem.gagliardo import (
    FormSpec,
    assemble_form,
    lattice_weights,
    rayleigh_quotient,
    seminorm_sq,
    tail_radius,
)
from fracmem.grid import (
    Field,
    Mask,
    domain_from_spec,
    embed_mask,
    indicator_field,
    intersect_translate,
    lattice_shift,
    overlap_volume_map,
)
from fracmem.membrane import MembraneConfig, composite_eigenvalue, optimize
from fracmem.rearrange import (
    POLYA_SZEGO_SLACK,
    hardy_littlewood_check,
    schwarz_decreasing,
    symmetrization_grid,
    symmetrize_mask,
    symmetrize_subset,
)

logger = logging.getLogger(__name__)

DomainInput = Union[Mask, Mapping[str, Any]]
CRule = Union[float, Callable[[int], int]]

DEFAULT_FK_SLACK = 0.02


def resolve_domain(domain: DomainInput, h: float | None = None) -> Mask:
    """Mask from either a mask or a domain description (grid keys plus a ``domain`` shape)."""
    if isinstance(domain, Mask):
        if h is not None and not math.isclose(h, domain.grid.h):
            raise ParameterError("h", "cannot respace an already rasterized mask")
        return domain
    return domain_from_spec(domain, h)


def bump_field(mask: Mask, center: Sequence[float], radius: float, kind: str = "bump") -> Field:
    """
    Nonnegative smooth bump restricted to a mask.

    Args:
        mask: Cells carrying the field.
        center: Bump centre in physical coordinates.
        radius: Support radius (``"bump"``) or standard deviation (``"gaussian"``).
        kind: ``"bump"`` for ``(1 - r^2/R^2)_+^2``, ``"gaussian"`` for ``exp(-r^2 / 2R^2)``.
    """
    if not radius > 0:
        raise ParameterError("radius", f"must be positive, got {radius}")
    pts = mask.grid.centers(mask.cells)
    r2 = np.sum((pts - np.asarray(center, dtype=float)) ** 2, axis=1) / radius**2
    if kind == "bump":
        values = np.clip(1.0 - r2, 0.0, None) ** 2
    elif kind == "gaussian":
        values = np.exp(-0.5 * r2)
    else:
        raise ParameterError("kind", f"unknown bump kind {kind!r}")
    return Field(mask, values)


# Faber–Krahn ----------------------------------------------------------------


@dataclass(frozen=True)
class FKReport:
    """Both sides of the Faber–Krahn comparison plus the rearrangement chain for the optimum."""

    Lambda_omega: float
    Lambda_ball: float
    gap: float
    h: float
    alpha: float
    c: float
    s: float
    slack: float
    passed: bool
    chain_lhs: float
    chain_rhs: float
    chain_holds: bool
    polya_szego_ratio: float
    hardy_littlewood: tuple[float, float]
    omega_cells: int
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hardy_littlewood"] = list(self.hardy_littlewood)
        return out


def faber_krahn_experiment(
    domain: DomainInput,
    alpha: float,
    c: float,
    s: float = 0.5,
    h: float | None = None,
    *,
    starts: int = 16,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    threads: int = 1,
    near_policy: str = "hat",
    slack: float = DEFAULT_FK_SLACK,
) -> FKReport:
    """
    Compare ``Lambda_Omega(alpha, c)`` with the value on the quasi-ball of the same measure.

    Both domains are placed on one centred grid and assembled with one
    FormSpec, so they see the same diagonal. The optimal pair on the
    domain is then rearranged (``u`` decreasingly, ``D`` onto the outer shell)
    and its Rayleigh quotient on the quasi-ball is checked against the optimum.

    Args:
        domain: Mask or domain description.
        alpha: Potential height.
        c: Potential measure, snapped to whole cells.
        s: Fractional order.
        h: Optional grid spacing overriding the one in the description.
        slack: Allowed relative deficit ``-gap / Lambda_Omega``.
    """
    omega = resolve_domain(domain, h)
    grid = symmetrization_grid(omega.grid, omega.count)
    omega = embed_mask(omega, grid)
    ball = symmetrize_mask(omega)
    spec = FormSpec(s=s, dim=grid.dim, near_policy=near_policy)
    form = assemble_form(grid, omega, spec)
    form_ball = assemble_form(grid, ball, spec)

    config = MembraneConfig(alpha=alpha, c=c, starts=starts, seed=seed, tol=tol, threads=threads)
    result = optimize(form, config)
    result_ball = optimize(form_ball, config)

    u_star = schwarz_decreasing(result.u).field
    d_star = symmetrize_subset(omega, result.D)
    chain_lhs = rayleigh_quotient(form_ball, u_star, d_star, alpha)
    chain_rhs = rayleigh_quotient(form, result.u, result.D, alpha)
    q_u = seminorm_sq(form, result.u)
    ps_ratio = seminorm_sq(form_ball, u_star) / q_u if q_u > 0 else float("nan")
    if ps_ratio > 1.0 + POLYA_SZEGO_SLACK:
        logger.warning("Symmetrized optimum raises the seminorm by a factor %.6g", ps_ratio)
    squared = Field(result.u.mask, result.u.values**2)
    hl = hardy_littlewood_check(indicator_field(omega, result.D), squared)

    gap = result.value - result_ball.value
    report = FKReport(
        Lambda_omega=result.value,
        Lambda_ball=result_ball.value,
        gap=gap,
        h=grid.h,
        alpha=alpha,
        c=result.c_snapped,
        s=s,
        slack=slack,
        passed=gap >= -slack * result.value,
        chain_lhs=chain_lhs,
        chain_rhs=chain_rhs,
        chain_holds=chain_lhs <= chain_rhs * (1.0 + slack),
        polya_szego_ratio=ps_ratio,
        hardy_littlewood=hl,
        omega_cells=omega.count,
        config={"starts": starts, "seed": seed, "tol": tol, "near_policy": near_policy},
    )
    logger.info(
        "Faber-Krahn: Lambda_Omega=%.8g Lambda_ball=%.8g gap=%.3e", report.Lambda_omega, report.Lambda_ball, gap
    )
    return report


def faber_krahn_batch(
    domain_spec: Mapping[str, Any],
    seeds: Iterable[int],
    alpha: float,
    c_fraction: float,
    s: float = 0.5,
    *,
    h: float | None = None,
    threads: int = 1,
    **kwargs: Any,
) -> list[FKReport]:
    """
    Faber–Krahn comparison over a family of seeded blob domains.

    Each domain uses ``c = c_fraction |Omega|`` so that every member of the
    family is compared at the same relative measure.
    """
    if not 0.0 < c_fraction < 1.0:
        raise ParameterError("c_fraction", f"must lie in (0, 1), got {c_fraction}")

    def one(seed: int) -> FKReport:
        spec = dict(domain_spec)
        spec["domain"] = {**domain_spec["domain"], "seed": int(seed)}
        omega = resolve_domain(spec, h)
        return faber_krahn_experiment(omega, alpha, c_fraction * omega.measure, s, **kwargs)

    return list(Parallel(n_jobs=threads, prefer="threads")(delayed(one)(seed) for seed in seeds))


# Lieb -----------------------------------------------------------------------


@dataclass(frozen=True)
class ShiftRecord:
    """Per-shift outcome of the Lieb experiment."""

    shift: tuple[int, ...]
    overlap: float
    c_x: float
    c: float
    admissible: bool
    Lambda_intersection: float
    strict: bool
    lambda_dirichlet: float
    Lambda_full: float
    chain_ok: bool
    monotone_ok: bool
    U: float
    W: float

    def to_dict(self) -> dict:
        out = asdict(self)
        out["shift"] = list(self.shift)
        return out


@dataclass(frozen=True)
class LiebReport:
    """Lieb experiment outcome; witnesses are the shifts flagged strict."""

    Lambda_1: float
    Lambda_2: float
    Lambda_sum: float
    alpha: float
    records: tuple[ShiftRecord, ...]
    wu_integral: float
    u_integral: float
    slack: float
    config: dict = field(default_factory=dict)

    @property
    def witnesses(self) -> tuple[tuple[int, ...], ...]:
        return tuple(rec.shift for rec in self.records if rec.strict)

    @property
    def wu_holds(self) -> bool:
        return self.wu_integral <= self.slack

    def to_dict(self) -> dict:
        return {
            "Lambda_1": self.Lambda_1,
            "Lambda_2": self.Lambda_2,
            "Lambda_sum": self.Lambda_sum,
            "alpha": self.alpha,
            "witnesses": [list(w) for w in self.witnesses],
            "wu_integral": self.wu_integral,
            "wu_holds": self.wu_holds,
            "u_integral": self.u_integral,
            "slack": self.slack,
            "config": self.config,
            "records": [rec.to_dict() for rec in self.records],
        }


def _measure_rule(c_rule: CRule) -> Callable[[int], int]:
    if callable(c_rule):
        return c_rule
    fraction = float(c_rule)
    if not 0.0 < fraction < 1.0:
        raise ParameterError("c_rule", f"fraction must lie in (0, 1), got {fraction}")
    return lambda cells: int(math.floor(fraction * cells))


def _shifted_values(u2: Field, cells: np.ndarray, offset: np.ndarray) -> np.ndarray:
    return u2.to_array()[tuple((cells - offset).T)]


def lieb_experiment(
    domain1: DomainInput,
    domain2: DomainInput,
    alpha1: float,
    alpha2: float,
    c1: float,
    c2: float,
    s: float = 0.5,
    alpha: float | None = None,
    c_rule: CRule = 0.5,
    shift_set: Iterable[Sequence[int]] | None = None,
    *,
    stride: int = 1,
    starts: int = 16,
    shift_starts: int | None = None,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    threads: int = 1,
    near_policy: str = "hat",
    slack: float | None = None,
) -> LiebReport:
    """
    Search lattice shifts for intersections beating the sum of two optimal values.

    All forms share one tail radius, so the energies of the shifted products
    add up over shifts exactly as in the continuum.

    Args:
        domain1: First domain (mask or description).
        domain2: Second domain, on a grid aligned with the first.
        alpha1: Potential height on the first domain.
        alpha2: Potential height on the second domain.
        c1: Potential measure on the first domain.
        c2: Potential measure on the second domain.
        s: Fractional order.
        alpha: Height used on intersections; defaults to ``(alpha1 + alpha2) / 2``.
        c_rule: Fraction of ``c_x`` (or a map from cell counts to cell counts)
            giving the measure used on each intersection.
        shift_set: Shifts to evaluate; defaults to every shift with positive overlap.
        stride: Keep only shifts whose components are multiples of ``stride``.
        shift_starts: Multi-start count on intersections; defaults to ``starts``.
        slack: Tolerance of the shift-summed ``W - Lambda U`` diagnostic.

    Raises:
        ParameterError: On out-of-range parameters.
        EmptyReportError: If no evaluated shift has positive overlap.
    """
    omega1, omega2 = resolve_domain(domain1), resolve_domain(domain2)
    offset = lattice_shift(omega2.grid, omega1.grid)
    if alpha1 <= 0 or alpha2 <= 0:
        raise ParameterError("alpha", "alpha1 and alpha2 must be positive")
    total_alpha = alpha1 + alpha2
    alpha = 0.5 * total_alpha if alpha is None else float(alpha)
    if not 0.0 < alpha < total_alpha:
        raise ParameterError("alpha", f"must lie in (0, {total_alpha}), got {alpha}")
    if stride < 1:
        raise ParameterError("stride", f"must be at least 1, got {stride}")
    rule = _measure_rule(c_rule)

    base = FormSpec(s=s, dim=omega1.grid.dim, near_policy=near_policy)
    radius = max(
        tail_radius(omega1.grid, omega1, base),
        tail_radius(omega2.grid, omega2, base),
    )
    spec = base.with_fixed_radius(radius)
    form1 = assemble_form(omega1.grid, omega1, spec)
    form2 = assemble_form(omega2.grid, omega2, spec)

    cfg1 = MembraneConfig(alpha=alpha1, c=c1, starts=starts, seed=seed, tol=tol, threads=threads)
    cfg2 = replace(cfg1, alpha=alpha2, c=c2)
    opt1, opt2 = optimize(form1, cfg1), optimize(form2, cfg2)
    lambda_sum = opt1.value + opt2.value

    overlaps = overlap_volume_map(omega1, omega2)
    if shift_set is None:
        shifts = list(overlaps)
    else:
        shifts = sorted({tuple(int(v) for v in k) for k in shift_set})
        shifts = [k for k in shifts if k in overlaps]
    shifts = [k for k in shifts if all(v % stride == 0 for v in k)]
    if not shifts:
        raise EmptyReportError("shift_set", "no shift with positive overlap to evaluate")

    local = replace(cfg1, alpha=alpha, starts=shift_starts or starts, threads=1)
    volume = omega1.grid.cell_volume
    C = spec.C_Ns

    def evaluate(shift: tuple[int, ...]) -> ShiftRecord:
        omega_x = intersect_translate(omega1, omega2, shift)
        d_x = intersect_translate(opt1.D, opt2.D, shift)
        form_x = assemble_form(omega1.grid, omega_x, spec)
        u_x = Field(
            omega_x,
            opt1.u.restrict(omega_x).values
            * _shifted_values(opt2.u, omega_x.cells, offset + np.asarray(shift)),
        )
        u_mass = u_x.norm_sq()
        w_mass = 0.5 * C * seminorm_sq(form_x, u_x) + total_alpha * float(
            np.sum(u_x.restrict(d_x).values ** 2) * volume
        )
        lam_dir = smallest_eigenpair(form_x, None, 0.0, tol).lam
        k_x = d_x.count
        admissible = k_x >= 2
        k = min(max(rule(k_x), 1), k_x - 1) if admissible else 0
        value = composite_eigenvalue(form_x, alpha, k * volume, local) if admissible else lam_dir
        full = composite_eigenvalue(form_x, total_alpha, k_x * volume, local)
        margin = 10 * tol * max(1.0, abs(full))
        return ShiftRecord(
            shift=shift,
            overlap=overlaps[shift],
            c_x=k_x * volume,
            c=k * volume,
            admissible=admissible,
            Lambda_intersection=value,
            strict=admissible and value < lambda_sum,
            lambda_dirichlet=lam_dir,
            Lambda_full=full,
            chain_ok=lam_dir <= full + margin,
            monotone_ok=value <= full + margin,
            U=u_mass,
            W=w_mass,
        )

    records = tuple(Parallel(n_jobs=threads, prefer="threads")(delayed(evaluate)(k) for k in shifts))
    wu = math.fsum((rec.W - lambda_sum * rec.U) * volume for rec in records)
    u_integral = math.fsum(rec.U * volume for rec in records)
    report = LiebReport(
        Lambda_1=opt1.value,
        Lambda_2=opt2.value,
        Lambda_sum=lambda_sum,
        alpha=alpha,
        records=records,
        wu_integral=wu,
        u_integral=u_integral,
        slack=1e-8 * lambda_sum if slack is None else float(slack),
        config={
            "alpha1": alpha1,
            "alpha2": alpha2,
            "c1": opt1.c_snapped,
            "c2": opt2.c_snapped,
            "s": s,
            "seed": seed,
            "starts": starts,
            "shift_starts": local.starts,
            "stride": stride,
            "tol": tol,
            "tail_radius": radius,
        },
    )
    logger.info(
        "Lieb: Lambda_sum=%.8g, %d shifts, %d witnesses, WU=%.3e",
        lambda_sum,
        len(records),
        len(report.witnesses),
        wu,
    )
    return report


# Product identity -----------------------------------------------------------


@dataclass(frozen=True)
class IdentityReport:
    """
    Shift-integrated split of ``[u_x]^2`` into the three Fubini terms.

    ``J1`` and ``J3`` are compared with their closed forms ``[u1]^2 ||u2||^2``
    and ``[u2]^2 ||u1||^2``; ``defect = rhs - lhs`` equals ``-J2``.
    """

    J1: float
    J2: float
    J3: float
    lhs: float
    rhs: float
    defect: float
    J1_closed: float
    J3_closed: float
    decomposition_error: float
    closed_form_error: float
    shifts: int
    nonpositive_J2_shifts: int

    def to_dict(self) -> dict:
        return asdict(self)


def _pair_density(u: np.ndarray, weights: np.ndarray, total: float) -> np.ndarray:
    """``e_i = sum_m w(m) (u_i - u_{i+m})^2`` on an array padded by the weight radius."""
    smoothed = fftconvolve(u, weights, mode="same")
    smoothed_sq = fftconvolve(u**2, weights, mode="same")
    return total * u**2 - 2.0 * u * smoothed + smoothed_sq


def _padded(f: Field, pad: int) -> np.ndarray:
    return np.pad(f.to_array(), pad)


def pair_energy(u: Field, spec: FormSpec, radius: float) -> float:
    """Lattice pair sum ``sum_i sum_{0<|m|h<R} w(m) (u_i - u_{i+m})^2``."""
    weights = lattice_weights(spec, u.grid.h, radius)
    pad = (weights.shape[0] - 1) // 2
    return float(np.sum(_pair_density(_padded(u, pad), weights, float(weights.sum()))))


def product_identity_check(
    u1: Field, u2: Field, spec: FormSpec, radius: float | None = None
) -> IdentityReport:
    """
    Evaluate the three-term split of the shift-integrated product seminorm.

    Only explicit pair weights within ``radius`` enter (no far-field lumping),
    so the shift sums reproduce the closed forms up to round-off for any
    weights. Shifts cover every translate of ``u2`` that meets the pair
    footprint of ``u1``.

    Raises:
        ParameterError: If the grids differ in spacing or alignment.
    """
    grid1, grid2 = u1.grid, u2.grid
    offset = lattice_shift(grid2, grid1)
    h = grid1.h
    if radius is None:
        diam = max(grid1.diameter, grid2.diameter)
        radius = diam + max(4.0 * h, 0.5 * diam)
    weights = lattice_weights(spec, h, radius)
    pad = (weights.shape[0] - 1) // 2
    total = float(weights.sum())
    volume = grid1.cell_volume

    a1 = _padded(u1, pad)
    sq1 = a1**2
    conv_u1 = fftconvolve(a1, weights, mode="same")
    conv_sq1 = fftconvolve(sq1, weights, mode="same")
    e1 = total * sq1 - 2.0 * a1 * conv_u1 + conv_sq1

    box = a1.shape
    support2 = u2.mask.cells + offset + pad
    lo2, hi2 = support2.min(axis=0), support2.max(axis=0)
    ranges = [range(-int(h2), int(n - l2)) for l2, h2, n in zip(lo2, hi2, box)]

    J1 = J2 = J3 = lhs = 0.0
    shifts = nonpositive = 0
    values2 = u2.values
    for shift in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(len(box), -1).T:
        cells = support2 + shift
        inside = np.all((cells >= 0) & (cells < np.asarray(box)), axis=1)
        if not inside.any():
            continue
        v = np.zeros(box)
        v[tuple(cells[inside].T)] = values2[inside]
        v_sq = v**2
        conv_uv = fftconvolve(a1 * v, weights, mode="same")
        conv_sqv = fftconvolve(sq1 * v, weights, mode="same")
        j1 = float(np.sum(e1 * v_sq))
        t1 = np.sum(v * a1 * conv_uv)
        t2 = -np.sum(v_sq * a1 * conv_u1)
        t3 = -np.sum(v * conv_sqv)
        t4 = np.sum(v_sq * conv_sq1)
        j2 = float(-2.0 * (t1 + t2 + t3 + t4))
        j3 = float(t4 - 2.0 * np.sum(v * conv_sqv) + total * np.sum(sq1 * v_sq))
        ux = a1 * v
        left = float(2.0 * total * np.sum(ux**2) - 2.0 * np.sum(ux * conv_uv))
        J1 += j1 * volume
        J2 += j2 * volume
        J3 += j3 * volume
        lhs += left * volume
        shifts += 1
        nonpositive += j2 <= 0.0

    seminorm1 = float(np.sum(e1))
    seminorm2 = pair_energy(u2, spec, radius)
    J1_closed = seminorm1 * u2.norm_sq()
    J3_closed = seminorm2 * u1.norm_sq()
    rhs = J1_closed + J3_closed
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return IdentityReport(
        J1=J1,
        J2=J2,
        J3=J3,
        lhs=lhs,
        rhs=rhs,
        defect=rhs - lhs,
        J1_closed=J1_closed,
        J3_closed=J3_closed,
        decomposition_error=abs(J1 + J2 + J3 - lhs) / scale,
        closed_form_error=max(
            abs(J1 - J1_closed) / max(abs(J1_closed), 1e-300),
            abs(J3 - J3_closed) / max(abs(J3_closed), 1e-300),
        ),
        shifts=shifts,
        nonpositive_J2_shifts=nonpositive,
    )

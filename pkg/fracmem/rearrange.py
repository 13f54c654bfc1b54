"""
Discrete rearrangements of fields and sets.

Cells of a centred grid are ranked by the exact squared distance of their
centres to the origin, ties broken lexicographically; the first ``n`` cells
of that ranking form the quasi-ball of ``n`` cells. Schwarz symmetrization
places sorted field values on the quasi-ball in that order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from fracmem.errors import ParameterError
from fracmem.gagliardo import FormSpec, QuadraticForm, assemble_form, seminorm_sq, unit_ball_volume
from fracmem.grid import Field, Grid, Mask, _same_grid, embed_field, full_mask, indicator_field, make_mask

logger = logging.getLogger(__name__)

KINDS = ("decreasing", "increasing")
POLYA_SZEGO_SLACK = 0.01

FormBuilder = Union[FormSpec, Callable[[Grid, Mask], QuadraticForm]]


@dataclass(frozen=True)
class RearrangementProfile:
    """
    One-dimensional rearrangement on ``[0, |Omega|]`` as a step function.

    ``values[j]`` is the value on the j-th interval of length ``h^dim``. The
    decreasing profile is left-continuous (value at 0 is the maximum); the
    increasing one is right-continuous.
    """

    volume: float
    values: np.ndarray = field(repr=False)
    kind: str

    @property
    def length(self) -> float:
        return self.volume * len(self.values)

    @property
    def breaks(self) -> np.ndarray:
        return self.volume * np.arange(len(self.values) + 1)

    def __call__(self, xi: np.ndarray | float) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        n = len(self.values)
        scaled = xi / self.volume
        if self.kind == "decreasing":
            index = np.ceil(scaled - 1e-9).astype(int) - 1
        else:
            index = np.floor(scaled + 1e-9).astype(int)
        out = self.values[np.clip(index, 0, n - 1)]
        if self.kind == "decreasing":
            out = np.where(scaled > n + 1e-9, 0.0, out)
        return out

    def rows(self) -> list[dict]:
        b = self.breaks
        return [
            {"xi_left": float(b[j]), "xi_right": float(b[j + 1]), "value": float(v)}
            for j, v in enumerate(self.values)
        ]


def decreasing_rearrangement(f: Field) -> RearrangementProfile:
    """Nonincreasing rearrangement ``f*`` on ``[0, |Omega|]``."""
    return RearrangementProfile(f.grid.cell_volume, np.sort(f.values)[::-1], "decreasing")


def increasing_rearrangement(f: Field) -> RearrangementProfile:
    """Nondecreasing rearrangement ``f_*`` on ``[0, |Omega|]``."""
    return RearrangementProfile(f.grid.cell_volume, np.sort(f.values), "increasing")


def radial_order(grid: Grid, cells: np.ndarray) -> np.ndarray:
    """
    Permutation sorting ``cells`` by distance of their centres to the origin.

    On a centred grid the comparison uses exact integer squared distances in
    half-cell units.
    """
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, grid.dim)
    if grid.is_centered():
        doubled = 2 * cells + 1 - np.asarray(grid.shape)
        key = np.sum(doubled**2, axis=1)
    else:
        key = np.sum(grid.centers(cells) ** 2, axis=1)
    keys = tuple(cells[:, a] for a in range(grid.dim - 1, -1, -1)) + (key,)
    return np.lexsort(keys)


def symmetrization_grid(grid: Grid, n_cells: int) -> Grid:
    """
    Smallest centred grid aligned with ``grid`` that covers its box and a ball of ``n_cells`` cells.

    Returns ``grid`` itself when it already qualifies.

    Raises:
        ParameterError: If no centred grid is lattice aligned with ``grid``.
    """
    h = grid.h
    radius = (n_cells / unit_ball_volume(grid.dim)) ** (1.0 / grid.dim)
    ball = 2 * int(math.ceil(radius)) + 2
    shape = []
    for lo, hi in zip(grid.origin, grid.upper):
        frac = (lo / h) % 1.0
        if min(frac, 1.0 - frac) < 1e-6:
            parity = 0
        elif abs(frac - 0.5) < 1e-6:
            parity = 1
        else:
            raise ParameterError("origin", "grid is not aligned with any origin-centred grid")
        cover = int(math.ceil(2.0 * max(abs(lo), abs(hi)) / h - 1e-6))
        size = max(cover, ball)
        if size % 2 != parity:
            size += 1
        shape.append(size)
    target = Grid(grid.dim, tuple(-0.5 * n * h for n in shape), h, tuple(shape))
    return grid if _same_grid(grid, target) else target


def quasi_ball(grid: Grid, n_cells: int) -> Mask:
    """The ``n_cells`` cells of a centred grid closest to the origin."""
    if not grid.is_centered():
        raise ParameterError("grid", "quasi-balls are built on origin-centred grids")
    if not 0 < n_cells <= grid.n_cells:
        raise ParameterError("n_cells", f"must lie in [1, {grid.n_cells}], got {n_cells}")
    cells = grid.all_cells()
    return make_mask(grid, cells[radial_order(grid, cells)[:n_cells]])


def symmetrize_mask(mask: Mask) -> Mask:
    """Quasi-ball with the same number of cells as ``mask``."""
    return quasi_ball(symmetrization_grid(mask.grid, mask.count), mask.count)


@dataclass(frozen=True)
class SymmetrizedField:
    """
    Field rearranged onto the quasi-ball.

    Attributes:
        field: The rearranged field.
        ordering: ``ordering[r]`` is the position (in mask order) of the cell of radial rank ``r``.
        kind: ``"decreasing"`` or ``"increasing"``.
    """

    field: Field
    ordering: np.ndarray = field(repr=False)
    kind: str


def _schwarz(f: Field, kind: str) -> SymmetrizedField:
    target = symmetrize_mask(f.mask)
    ordering = radial_order(target.grid, target.cells)
    ranked = np.sort(f.values)
    if kind == "decreasing":
        ranked = ranked[::-1]
    values = np.empty(target.count)
    values[ordering] = ranked
    return SymmetrizedField(Field(target, values), ordering, kind)


def schwarz_decreasing(f: Field) -> SymmetrizedField:
    """Schwarz symmetrization: largest values nearest the origin."""
    return _schwarz(f, "decreasing")


def schwarz_increasing(f: Field) -> SymmetrizedField:
    """Increasing symmetrization: smallest values nearest the origin."""
    return _schwarz(f, "increasing")


def symmetrize_subset(domain: Mask, subset: Mask) -> Mask:
    """
    Set whose indicator is the increasing symmetrization of ``chi_subset``.

    It has the measure of ``subset`` and fills the outer shell of the quasi-ball.
    """
    star = schwarz_increasing(indicator_field(domain, subset)).field
    return star.mask.subset(np.flatnonzero(star.values > 0.5))


def hardy_littlewood_check(f: Field, g: Field) -> tuple[float, float]:
    """
    Both sides of ``sum f_* g^* h^dim <= sum f g h^dim``.

    Raises:
        ParameterError: If the fields live on different masks.
    """
    if f.mask != g.mask:
        raise ParameterError("g", "fields must share the same mask")
    volume = f.grid.cell_volume
    lower = schwarz_increasing(f).field.values
    upper = schwarz_decreasing(g).field.values
    lhs = math.fsum(lower * upper) * volume
    rhs = math.fsum(f.values * g.values) * volume
    return lhs, rhs


def _builder(form_builder: FormBuilder) -> Callable[[Grid, Mask], QuadraticForm]:
    if isinstance(form_builder, FormSpec):
        spec = form_builder
        return lambda grid, mask: assemble_form(grid, mask, spec)
    return form_builder


def _on_box(f: Field, box: Mask) -> Field:
    return Field(box, f.to_array().ravel())


def polya_szego_check(f: Field, form_builder: FormBuilder) -> tuple[float, float]:
    """
    Both sides of ``Q(f^*) <= Q(f)`` evaluated with one form on a common box.

    ``f`` should be nonnegative. The box is the centred grid holding both the
    support of ``f`` and its quasi-ball.
    """
    grid = symmetrization_grid(f.grid, f.mask.count)
    moved = embed_field(f, grid)
    star = schwarz_decreasing(moved).field
    box = full_mask(grid)
    form = _builder(form_builder)(grid, box)
    lhs, rhs = seminorm_sq(form, _on_box(star, box)), seminorm_sq(form, _on_box(moved, box))
    if lhs > rhs * (1.0 + POLYA_SZEGO_SLACK):
        logger.warning("Symmetrized seminorm exceeds the original by %.3g%% (h=%.4g)", 100 * (lhs / rhs - 1.0), grid.h)
    return lhs, rhs

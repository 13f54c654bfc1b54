"""Test the composite-membrane optimizer."""

import inspect

import numpy as np
import pytest

from fracmem.eigensolve import dirichlet_eigenvalue, smallest_eigenpair
from fracmem.errors import ParameterError
from fracmem.gagliardo import FormSpec, assemble_form
from fracmem.grid import Field, full_mask, make_grid, make_mask, mask_from_array
from fracmem.membrane import (
    MembraneConfig,
    ball_uniqueness_probe,
    bathtub_subset,
    brute_force_lambda,
    brute_force_optimum,
    composite_eigenvalue,
    monotonicity_sweep,
    optimize,
    snap_measure,
)


@pytest.fixture
def form():
    """Ten cells of width 0.2 covering (-1, 1) in a twelve cell box."""
    grid = make_grid(1, -1.2, 0.2, 12)
    domain = make_mask(grid, [[i] for i in range(1, 11)])
    return assemble_form(grid, domain, FormSpec(0.5, 1))


def test_snap_measure_rounds_half_up():
    """Test measures snap to the nearest whole number of cells."""
    grid = make_grid(1, 0.0, 0.25, 8)
    domain = full_mask(grid)
    assert snap_measure(0.375, domain) == (2, 0.5)
    assert snap_measure(0.0, domain) == (0, 0.0)
    assert snap_measure(2.0, domain) == (8, 2.0)
    with pytest.raises(ParameterError):
        snap_measure(-0.1, domain)
    with pytest.raises(ParameterError):
        snap_measure(2.5, domain)


def test_bathtub_subset_and_tie_rules():
    """Test the bathtub set picks the smallest squares with the requested tie order."""
    grid = make_grid(1, 0.0, 1.0, 4)
    u = Field(full_mask(grid), [3.0, 1.0, -2.0, -1.0])
    assert bathtub_subset(u, 2.0).cells.ravel().tolist() == [1, 3]
    assert bathtub_subset(u, 1.0).cells.ravel().tolist() == [1]
    assert bathtub_subset(u, 1.0, "reverse").cells.ravel().tolist() == [3]
    with pytest.raises(ParameterError):
        bathtub_subset(u, 1.0, "random")


def test_config_validation():
    """Test invalid optimizer parameters are rejected."""
    with pytest.raises(ParameterError):
        MembraneConfig(alpha=0.0, c=0.4)
    with pytest.raises(ParameterError):
        MembraneConfig(alpha=1.0, c=-0.4)
    with pytest.raises(ParameterError):
        MembraneConfig(alpha=1.0, c=0.4, starts=0)
    with pytest.raises(ParameterError):
        MembraneConfig(alpha=1.0, c=0.4, tie_rule="coin")
    with pytest.raises(ParameterError):
        MembraneConfig(alpha=1.0, c=0.4, exchange_window=-1)


def test_optimize_matches_exhaustive_search(form):
    """Test the multi-start optimum against all sets of four cells."""
    config = MembraneConfig(alpha=8.0, c=0.8, starts=8, seed=1)
    result = optimize(form, config)
    expected, best_set = brute_force_optimum(form, 8.0, 0.8)
    assert result.value == pytest.approx(expected, rel=1e-9)
    assert result.D.count == 4
    assert result.c_snapped == pytest.approx(0.8)
    check = smallest_eigenpair(form, best_set, 8.0).lam
    assert check == pytest.approx(expected, rel=1e-9)


def test_optimum_places_potential_at_the_boundary(form):
    """Test the optimal set of an interval touches both ends."""
    result = optimize(form, MembraneConfig(alpha=8.0, c=0.8, starts=4))
    cells = result.D.cells.ravel().tolist()
    assert 1 in cells
    assert 10 in cells
    assert 5 not in cells


def test_trace_and_start_records(form):
    """Test per-round values never increase and every start is recorded."""
    result = optimize(form, MembraneConfig(alpha=5.0, c=0.6, starts=6, seed=3))
    assert all(b <= a for a, b in zip(result.trace, result.trace[1:]))
    assert len(result.starts) == 6
    assert [rec.start_id for rec in result.starts] == list(range(6))
    assert result.value == min(rec.value for rec in result.starts)
    assert result.converged
    assert len(result.degenerate_flags) == 6
    report = result.to_dict()
    assert {"lambda", "c_snapped", "alpha", "D_cells", "trace", "starts", "seed", "degenerate_flags"} <= set(report)
    assert report["D_cells"] == result.D.cells.tolist()
    assert len(report["D_cells"]) == 3
    assert report["lambda"] == result.value
    assert report["seed"] == 3
    assert all("exchanges" in rec for rec in report["starts"])


def test_optimize_is_reproducible_across_threads(form):
    """Test the seed fixes the outcome regardless of worker count."""
    serial = optimize(form, MembraneConfig(alpha=5.0, c=0.6, starts=6, seed=9))
    threaded = optimize(form, MembraneConfig(alpha=5.0, c=0.6, starts=6, seed=9, threads=2))
    assert threaded.value == serial.value
    assert threaded.D == serial.D
    assert threaded.start_id == serial.start_id


def test_optimize_rejects_endpoint_measures(form):
    """Test measures snapping to nothing or the whole domain are rejected."""
    with pytest.raises(ParameterError):
        optimize(form, MembraneConfig(alpha=1.0, c=0.05))
    with pytest.raises(ParameterError):
        optimize(form, MembraneConfig(alpha=1.0, c=2.0))


def test_composite_eigenvalue_endpoints(form):
    """Test the closed forms at zero and full measure."""
    config = MembraneConfig(alpha=3.0, c=0.4, starts=4)
    base = dirichlet_eigenvalue(form)
    assert composite_eigenvalue(form, 3.0, 0.0, config) == pytest.approx(base)
    assert composite_eigenvalue(form, 3.0, 2.0, config) == pytest.approx(base + 3.0, rel=1e-9)
    middle = composite_eigenvalue(form, 3.0, 0.4, config)
    assert base < middle < base + 3.0


def test_monotonicity_sweep(form):
    """Test the optimal value grows with both alpha and c."""
    config = MembraneConfig(alpha=1.0, c=0.4, starts=4)
    table = monotonicity_sweep(form, [1.0, 4.0, 16.0], [0.2, 0.6, 1.0], config)
    assert table.monotone
    assert table.values.shape == (3, 3)
    assert np.all(np.diff(table.values, axis=0) >= 0)
    assert np.all(np.diff(table.values, axis=1) >= 0)
    assert len(table.rows()) == 9
    with pytest.raises(ParameterError):
        monotonicity_sweep(form, [4.0, 1.0], [0.2], config)


def test_brute_force_size_limit():
    """Test exhaustive search refuses large domains."""
    grid = make_grid(1, 0.0, 0.1, 24)
    big = assemble_form(grid, full_mask(grid), FormSpec(0.5, 1))
    with pytest.raises(ParameterError):
        brute_force_lambda(big, 1.0, 0.5)


def test_ball_uniqueness_report(form):
    """Test the uniqueness report gives the optimum and one entry per start."""
    report = ball_uniqueness_probe(form, MembraneConfig(alpha=8.0, c=0.8, starts=4))
    assert isinstance(report["agree"], bool)
    assert len(report["starts"]) == 4
    assert report["lambda"] == pytest.approx(brute_force_lambda(form, 8.0, 0.8), rel=1e-9)


def _random_instance(rng):
    if rng.random() < 0.5:
        grid = make_grid(1, 0.0, 0.1, 16)
    else:
        grid = make_grid(2, [0.0, 0.0], 0.25, [5, 5])
    n = int(rng.integers(5, 15))
    indicator = np.zeros(grid.n_cells, dtype=bool)
    indicator[rng.choice(grid.n_cells, size=n, replace=False)] = True
    domain = mask_from_array(grid, indicator.reshape(grid.shape))
    form = assemble_form(grid, domain, FormSpec(float(rng.uniform(0.1, 0.9)), grid.dim))
    k = int(rng.integers(1, n))
    return form, float(rng.uniform(1.0, 50.0)), k * grid.cell_volume


def test_optimize_matches_exhaustive_search_on_random_instances():
    """Test swaps carry every start past bathtub-stable sets to the exhaustive optimum."""
    rng = np.random.default_rng(20240611)
    for _ in range(50):
        form, alpha, c = _random_instance(rng)
        expected, _ = brute_force_optimum(form, alpha, c)
        result = optimize(form, MembraneConfig(alpha=alpha, c=c, starts=16, seed=5))
        assert result.value == pytest.approx(expected, rel=1e-9, abs=1e-9)


def test_swaps_improve_a_bathtub_stable_start(form):
    """Test disabling swaps can only leave the optimizer at a higher value."""
    plain = optimize(form, MembraneConfig(alpha=30.0, c=1.0, starts=1, exchange_window=0))
    swapped = optimize(form, MembraneConfig(alpha=30.0, c=1.0, starts=1))
    assert plain.starts[0].exchanges == 0
    assert swapped.value <= plain.value
    assert swapped.value >= brute_force_lambda(form, 30.0, 1.0) - 1e-9


def test_monotonicity_sweep_default_slack():
    """Test the sweep flags drops larger than a relative 1e-9."""
    assert inspect.signature(monotonicity_sweep).parameters["slack"].default == 1e-9

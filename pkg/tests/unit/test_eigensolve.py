"""Test the smallest-eigenpair solvers."""

import numpy as np
import pytest
from scipy.linalg import eigh

from fracmem import eigensolve
from fracmem.eigensolve import dirichlet_eigenvalue, operator_matrix, smallest_eigenpair
from fracmem.errors import ParameterError, SolverError
from fracmem.gagliardo import FormSpec, assemble_form
from fracmem.grid import make_grid, make_mask


def interval_form(n_cells, pad=2, s=0.5):
    """Form of ``n_cells`` cells centred in a slightly larger 1D box."""
    h = 2.0 / n_cells
    grid = make_grid(1, -1.0 - pad * h, h, n_cells + 2 * pad)
    domain = make_mask(grid, [[i] for i in range(pad, pad + n_cells)])
    return assemble_form(grid, domain, FormSpec(s, 1))


@pytest.fixture
def small_form():
    return interval_form(24)


def test_single_cell_closed_form():
    """Test a one-cell domain against lambda = (C/2) t / h^dim + alpha."""
    grid = make_grid(1, 0.0, 0.5, 3)
    cell = make_mask(grid, [[1]])
    form = assemble_form(grid, cell, FormSpec(0.5, 1))
    pair = smallest_eigenpair(form, cell, 2.0)
    expected = 0.5 * form.C_Ns * form.tails[0] / grid.cell_volume + 2.0
    assert pair.lam == pytest.approx(expected, rel=1e-12)
    assert pair.vector.values[0] == pytest.approx(1 / np.sqrt(0.5))
    assert pair.degenerate is False


def test_eigenvector_normalization_and_sign(small_form):
    """Test the unit L2 norm and the positive ground state."""
    pair = smallest_eigenpair(small_form)
    assert pair.vector.norm_sq() == pytest.approx(1.0)
    assert np.all(pair.vector.values > 0)
    assert pair.residual <= eigensolve.DEFAULT_TOL
    assert pair.method == "dense"


def test_constant_potential_shifts_spectrum(small_form):
    """Test a potential on the whole domain adds alpha to the eigenvalue."""
    base = dirichlet_eigenvalue(small_form)
    shifted = smallest_eigenpair(small_form, small_form.domain, 5.0).lam
    assert shifted == pytest.approx(base + 5.0, rel=1e-9)


def test_potential_raises_eigenvalue(small_form):
    """Test a partial potential lands between the free and fully shifted values."""
    subset = make_mask(small_form.grid, [[i] for i in range(2, 8)])
    base = dirichlet_eigenvalue(small_form)
    value = smallest_eigenpair(small_form, subset, 5.0).lam
    assert base < value < base + 5.0


def test_dirichlet_value_of_interval_is_plausible():
    """Test the (-1, 1) eigenvalue at s = 1/2 against its known value."""
    assert dirichlet_eigenvalue(interval_form(64)) == pytest.approx(1.1578, rel=0.05)


def test_cholesky_path_matches_dense():
    """Test inverse iteration with a Cholesky factor on a mid-sized interval."""
    form = interval_form(640)
    subset = make_mask(form.grid, [[i] for i in range(2, 100)])
    pair = smallest_eigenpair(form, subset, 3.0)
    assert pair.method == "cholesky"
    expected = eigh(operator_matrix(form, subset, 3.0), eigvals_only=True, subset_by_index=[0, 0])[0]
    assert pair.lam == pytest.approx(expected, rel=1e-9)
    assert pair.vector.norm_sq() == pytest.approx(1.0)


def test_cg_path_matches_dense(monkeypatch, small_form):
    """Test the matrix-free path on a problem small enough to check densely."""
    monkeypatch.setattr(eigensolve, "DENSE_LIMIT", 0)
    monkeypatch.setattr(eigensolve, "CHOLESKY_LIMIT", 0)
    pair = smallest_eigenpair(small_form, None, 0.0, 1e-9)
    assert pair.method == "cg"
    expected = eigh(operator_matrix(small_form), eigvals_only=True)[0]
    assert pair.lam == pytest.approx(expected, rel=1e-8)


def test_solver_error_reports_best_residual(monkeypatch, small_form):
    """Test an exhausted iteration budget raises with diagnostics."""
    monkeypatch.setattr(eigensolve, "DENSE_LIMIT", 0)
    with pytest.raises(SolverError) as excinfo:
        smallest_eigenpair(small_form, None, 0.0, 1e-15, max_outer=1)
    assert excinfo.value.best_residual > 0
    assert excinfo.value.iterations == 1


def test_parameter_errors(small_form):
    """Test negative potentials and tolerances are rejected."""
    with pytest.raises(ParameterError):
        smallest_eigenpair(small_form, None, -1.0)
    with pytest.raises(ParameterError):
        smallest_eigenpair(small_form, None, 0.0, 0.0)


def test_to_dict_uses_lambda_key(small_form):
    """Test the report form of an eigenpair."""
    report = smallest_eigenpair(small_form).to_dict()
    assert set(report) == {"lambda", "residual", "iterations", "degenerate", "method", "n_cells"}
    assert report["n_cells"] == 24

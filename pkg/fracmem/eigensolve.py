"""Smallest eigenpair of the composite-membrane operator."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh
from scipy.sparse.linalg import LinearOperator, cg

from fracmem.errors import ParameterError, SolverError
from fracmem.gagliardo import QuadraticForm
from fracmem.grid import Field, Mask

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DENSE_LIMIT = 600
CHOLESKY_LIMIT = 4096
MAX_OUTER = 10_000
POLISH_STEPS = 8
STAGNATION_WINDOW = 50
DEGENERATE_GAP = 1e-12
DEGENERATE_RATE = 0.999


@dataclass(frozen=True)
class EigenPair:
    """
    Smallest eigenvalue with its eigenvector.

    Attributes:
        lam: The eigenvalue.
        vector: Eigenvector on the form's domain with ``sum u^2 h^dim = 1`` and
            its largest-magnitude entry positive.
        residual: ``||H u - lam u|| / (||u|| |lam|)``.
        iterations: Solver iterations spent (1 for a plain dense solve).
        degenerate: Whether the smallest eigenvalue looks repeated.
        method: ``"dense"``, ``"cholesky"`` or ``"cg"``.
    """

    lam: float
    vector: Field
    residual: float
    iterations: int
    degenerate: bool = False
    method: str = "dense"

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "residual": self.residual,
            "iterations": self.iterations,
            "degenerate": self.degenerate,
            "method": self.method,
            "n_cells": self.vector.mask.count,
        }


def _potential(form: QuadraticForm, subset: Mask | None, alpha: float) -> np.ndarray:
    diag = np.zeros(form.n)
    if subset is not None and subset.count:
        diag[form.domain.positions_of(subset)] = alpha
    return diag


def operator_matrix(form: QuadraticForm, subset: Mask | None = None, alpha: float = 0.0) -> np.ndarray:
    """Dense ``H = (C / (2 h^dim)) A + alpha diag(chi_subset)``."""
    scale = 0.5 * form.C_Ns / form.grid.cell_volume
    h = scale * form.matrix
    h[np.diag_indices(form.n)] += _potential(form, subset, alpha)
    return h


def _residual(hx: np.ndarray, lam: float, x: np.ndarray) -> float:
    return float(np.linalg.norm(hx - lam * x) / (np.linalg.norm(x) * abs(lam)))


def _inverse_iteration(
    apply: Callable[[np.ndarray], np.ndarray],
    solve: Callable[[np.ndarray, float], np.ndarray],
    x: np.ndarray,
    tol: float,
    max_steps: int,
) -> tuple[float, np.ndarray, float, int, float, float]:
    """Run inverse iteration; returns (lam, x, residual, steps, contraction rate, best residual)."""
    x = x / np.linalg.norm(x)
    hx = apply(x)
    lam = float(x @ hx)
    res = _residual(hx, lam, x)
    history = [res]
    steps = 0
    while res > tol and steps < max_steps:
        y = solve(x, lam)
        x = y / np.linalg.norm(y)
        hx = apply(x)
        lam = float(x @ hx)
        res = _residual(hx, lam, x)
        steps += 1
        history.append(res)
        if steps > STAGNATION_WINDOW and res > 0.5 * min(history[:-STAGNATION_WINDOW]):
            break
    rate = history[-1] / history[-2] if len(history) > 1 and history[-2] > 0 else 0.0
    return lam, x, res, steps, rate, min(history)


def _finish(form: QuadraticForm, x: np.ndarray) -> Field:
    x = x / np.sqrt(float(x @ x) * form.grid.cell_volume)
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    return Field(form.domain, x)


def smallest_eigenpair(
    form: QuadraticForm,
    subset: Mask | None = None,
    alpha: float = 0.0,
    tol: float = DEFAULT_TOL,
    *,
    x0: np.ndarray | Field | None = None,
    max_outer: int = MAX_OUTER,
) -> EigenPair:
    """
    Smallest eigenpair of ``(C / (2 h^dim)) A + alpha diag(chi_subset)``.

    Small problems use a dense symmetric eigensolver, polished by inverse
    iteration if needed. Larger ones run inverse iteration with a Cholesky
    factor, or with conjugate gradients on top of the FFT matvec beyond
    ``CHOLESKY_LIMIT`` cells.

    Args:
        form: Assembled form of the domain.
        subset: Cells carrying the potential; ``None`` means no potential.
        alpha: Potential height, nonnegative.
        tol: Relative residual to reach.
        x0: Optional warm start in domain order.
        max_outer: Cap on inverse iterations.

    Raises:
        ParameterError: On negative ``alpha`` or nonpositive ``tol``.
        SolverError: If the residual contract cannot be met.
    """
    if alpha < 0:
        raise ParameterError("alpha", f"must be nonnegative, got {alpha}")
    if not tol > 0:
        raise ParameterError("tol", f"must be positive, got {tol}")
    n = form.n
    if isinstance(x0, Field):
        x0 = x0.values
    start = np.ones(n) if x0 is None or len(x0) != n or not np.any(x0) else np.asarray(x0, float)

    if n < DENSE_LIMIT:
        return _dense(form, subset, alpha, tol)

    scale = 0.5 * form.C_Ns / form.grid.cell_volume
    potential = _potential(form, subset, alpha)

    if n <= CHOLESKY_LIMIT:
        h = operator_matrix(form, subset, alpha)
        factor = cho_factor(h)
        apply = h.__matmul__
        method = "cholesky"

        def solve(b: np.ndarray, lam: float) -> np.ndarray:
            return cho_solve(factor, b)

    else:
        method = "cg"

        def apply(v: np.ndarray) -> np.ndarray:
            return scale * form.matvec(v) + potential * v

        op = LinearOperator((n, n), matvec=apply, dtype=float)
        inner_rtol = max(0.01 * tol, 1e-14)

        def solve(b: np.ndarray, lam: float) -> np.ndarray:
            y, _ = cg(op, b, x0=b / lam, rtol=inner_rtol, maxiter=10 * n)
            return y

    lam, x, res, steps, rate, best = _inverse_iteration(apply, solve, start, tol, max_outer)
    if res > tol:
        raise SolverError("inverse iteration did not converge", best, steps)
    logger.debug("Eigenpair via %s: lambda=%.12g residual=%.2e steps=%d", method, lam, res, steps)
    degenerate = rate > DEGENERATE_RATE
    if degenerate:
        logger.warning("Slow contraction (rate %.4f): smallest eigenvalue %.10g may be repeated", rate, lam)
    return EigenPair(lam, _finish(form, x), res, steps, degenerate, method)


def _dense(form: QuadraticForm, subset: Mask | None, alpha: float, tol: float) -> EigenPair:
    h = operator_matrix(form, subset, alpha)
    n = form.n
    vals, vecs = eigh(h, subset_by_index=[0, min(1, n - 1)])
    lam, x = float(vals[0]), vecs[:, 0]
    res = _residual(h @ x, lam, x)
    iterations = 1
    if res > tol:
        factor = cho_factor(h)
        lam, x, res, steps, _, best = _inverse_iteration(
            h.__matmul__, lambda b, _lam: cho_solve(factor, b), x, tol, POLISH_STEPS
        )
        iterations += steps
        if res > tol:
            raise SolverError("dense eigensolve missed the residual target", best, iterations)
    degenerate = n > 1 and float(vals[1] - vals[0]) <= DEGENERATE_GAP * max(abs(float(vals[0])), 1.0)
    if degenerate:
        logger.warning("Smallest eigenvalue %.10g is repeated to within %.1e", lam, DEGENERATE_GAP)
    return EigenPair(lam, _finish(form, x), res, iterations, degenerate, "dense")


def dirichlet_eigenvalue(form: QuadraticForm, tol: float = DEFAULT_TOL) -> float:
    """First Dirichlet eigenvalue of the fractional Laplacian on the form's domain."""
    return smallest_eigenpair(form, None, 0.0, tol).lam

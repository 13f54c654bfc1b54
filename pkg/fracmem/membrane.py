"""
Composite-membrane optimization by alternating minimization.

For a fixed potential set the optimal eigenfunction is an eigenpair; for a
fixed eigenfunction the optimal set of prescribed measure collects the cells
where ``u^2`` is smallest (the bathtub rule). Alternating the two steps never
increases the eigenvalue, but it can stall on a set that is bathtub-stable
without being optimal; such sets are improved by single-cell swaps between
the set and its complement.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from joblib import Parallel, delayed

from fracmem.eigensolve import DEFAULT_TOL, EigenPair, operator_matrix, smallest_eigenpair
from fracmem.errors import ParameterError, SolverError
from fracmem.gagliardo import QuadraticForm
from fracmem.grid import Field, Mask

logger = logging.getLogger(__name__)

TIE_RULES = ("lexicographic", "reverse")
BRUTE_FORCE_LIMIT = 20
_BRUTE_BATCH = 4096


@dataclass(frozen=True)
class MembraneConfig:
    """
    Parameters of one composite-membrane optimization.

    Attributes:
        alpha: Potential height, positive.
        c: Target measure of the potential set (snapped to whole cells).
        starts: Number of multi-start runs.
        seed: Seed of the random initial sets.
        tol: Eigensolver residual and improvement tolerance.
        max_outer: Cap on alternating rounds per start.
        tie_rule: Order among cells with equal ``u^2``.
        threads: Worker threads for the starts.
        exchange_window: Cells on each side of the bathtub threshold tried in
            single swaps once a start is bathtub-stable; 0 disables the swaps.
            Domains of at most ``BRUTE_FORCE_LIMIT`` cells try every swap.
    """

    alpha: float
    c: float
    starts: int = 16
    seed: int = 0
    tol: float = DEFAULT_TOL
    max_outer: int = 200
    tie_rule: str = "lexicographic"
    threads: int = 1
    exchange_window: int = 4

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ParameterError("alpha", f"must be positive, got {self.alpha}")
        if self.c < 0:
            raise ParameterError("c", f"must be nonnegative, got {self.c}")
        if self.starts < 1:
            raise ParameterError("starts", f"need at least one start, got {self.starts}")
        if not self.tol > 0:
            raise ParameterError("tol", f"must be positive, got {self.tol}")
        if self.max_outer < 1:
            raise ParameterError("max_outer", f"must be at least 1, got {self.max_outer}")
        if self.exchange_window < 0:
            raise ParameterError("exchange_window", f"must be nonnegative, got {self.exchange_window}")
        if self.tie_rule not in TIE_RULES:
            raise ParameterError("tie_rule", f"expected one of {TIE_RULES}, got {self.tie_rule!r}")


@dataclass(frozen=True)
class StartRecord:
    """Outcome of a single start."""

    start_id: int
    value: float
    rounds: int
    converged: bool
    stabilized: bool
    subset: Mask = field(repr=False)
    degenerate: bool = False
    exchanges: int = 0

    def to_dict(self) -> dict:
        return {
            "start_id": self.start_id,
            "lambda": self.value,
            "rounds": self.rounds,
            "exchanges": self.exchanges,
            "converged": self.converged,
            "stabilized": self.stabilized,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class OptimizationResult:
    """
    Best configuration over all starts.

    Attributes:
        value: Approximate ``Lambda_Omega(alpha, c)``.
        u: Optimal eigenfunction, normalized and nonnegative up to round-off.
        D: Optimal potential set.
        trace: Eigenvalue after every round of the winning start, nonincreasing.
        start_id: Index of the winning start.
        converged: Whether the winning start met a stopping rule.
        c_snapped: Measure of ``D`` after snapping to whole cells.
        alpha: Potential height.
        starts: Per-start records in start order.
        seed: Seed of the random starts.
    """

    value: float
    u: Field = field(repr=False)
    D: Mask = field(repr=False)
    trace: tuple[float, ...]
    start_id: int
    converged: bool
    c_snapped: float
    alpha: float
    starts: tuple[StartRecord, ...] = ()
    seed: int = 0

    @property
    def degenerate_flags(self) -> tuple[bool, ...]:
        return tuple(rec.degenerate for rec in self.starts)

    def to_dict(self) -> dict:
        return {
            "lambda": self.value,
            "c_snapped": self.c_snapped,
            "alpha": self.alpha,
            "D_cells": self.D.cells.tolist(),
            "trace": list(self.trace),
            "starts": [rec.to_dict() for rec in self.starts],
            "seed": self.seed,
            "degenerate_flags": list(self.degenerate_flags),
            "start_id": self.start_id,
            "converged": self.converged,
        }


def snap_measure(c: float, domain: Mask) -> tuple[int, float]:
    """
    Round a target measure to a whole number of cells (half up).

    Returns:
        The cell count and the snapped measure.

    Raises:
        ParameterError: If ``c`` is negative or exceeds ``|domain|``.
    """
    volume = domain.grid.cell_volume
    if c < 0 or c > domain.measure + 0.5 * volume:
        raise ParameterError("c", f"must lie in [0, {domain.measure:.6g}], got {c}")
    k = min(int(np.floor(c / volume + 0.5)), domain.count)
    return k, k * volume


def _selection_order(u: Field, tie_rule: str) -> np.ndarray:
    rank = np.arange(u.mask.count)
    if tie_rule == "reverse":
        rank = rank[::-1]
    return np.lexsort((rank, u.values**2))


def bathtub_subset(u: Field, c: float, tie_rule: str = "lexicographic") -> Mask:
    """
    Set of measure ``c`` where ``u^2`` is smallest.

    Args:
        u: Field on the domain.
        c: Target measure, snapped to whole cells.
        tie_rule: ``"lexicographic"`` prefers lower cell indices among equal
            values, ``"reverse"`` prefers higher ones.
    """
    if tie_rule not in TIE_RULES:
        raise ParameterError("tie_rule", f"expected one of {TIE_RULES}, got {tie_rule!r}")
    k, _ = snap_measure(c, u.mask)
    chosen = np.sort(_selection_order(u, tie_rule)[:k])
    return u.mask.subset(chosen)


def _random_subset(domain: Mask, k: int, seed: int, start_id: int) -> Mask:
    rng = np.random.default_rng([seed, start_id])
    return domain.subset(np.sort(rng.choice(domain.count, size=k, replace=False)))


def _swap_candidates(domain: Mask, inside: np.ndarray, u: Field, window: int) -> tuple[np.ndarray, np.ndarray]:
    outside = np.setdiff1d(np.arange(domain.count), inside)
    if domain.count <= BRUTE_FORCE_LIMIT:
        return inside, outside
    weight = u.values**2
    inside = inside[np.argsort(-weight[inside], kind="stable")[:window]]
    outside = outside[np.argsort(weight[outside], kind="stable")[:window]]
    return inside, outside


def _best_swap(
    form: QuadraticForm, config: MembraneConfig, subset: Mask, pair: EigenPair
) -> tuple[Mask, EigenPair] | None:
    """
    Best exchange of one cell of ``subset`` with one cell outside it.

    Returns ``None`` unless some swap lowers the eigenvalue by more than the
    relative tolerance.
    """
    if config.exchange_window == 0:
        return None
    domain = form.domain
    current = domain.positions_of(subset)
    inside, outside = _swap_candidates(domain, current, pair.vector, config.exchange_window)
    threshold = pair.lam - config.tol * max(1.0, abs(pair.lam))
    best: tuple[Mask, EigenPair] | None = None
    for i in inside:
        kept = current[current != i]
        for j in outside:
            candidate = domain.subset(np.sort(np.append(kept, j)))
            trial = smallest_eigenpair(form, candidate, config.alpha, config.tol, x0=pair.vector)
            if trial.lam < threshold and (best is None or trial.lam < best[1].lam):
                best = (candidate, trial)
    return best


def _run_start(
    form: QuadraticForm, config: MembraneConfig, initial: Mask, start_id: int, warm: Field
) -> tuple[StartRecord, EigenPair, tuple[float, ...]]:
    """
    Alternate eigensolves and bathtub steps; at a bathtub-stable set try single swaps.

    A step is taken only when it lowers the eigenvalue by more than ``tol``
    (relative), so the trace decreases strictly.
    """
    subset = initial
    exchanges = 0
    try:
        pair = smallest_eigenpair(form, subset, config.alpha, config.tol, x0=warm)
        trace = [pair.lam]
        converged = stabilized = False
        for _ in range(config.max_outer):
            threshold = pair.lam - config.tol * max(1.0, abs(pair.lam))
            candidate = bathtub_subset(pair.vector, config.c, config.tie_rule)
            stabilized = candidate == subset
            if not stabilized:
                nxt = smallest_eigenpair(form, candidate, config.alpha, config.tol, x0=pair.vector)
                if nxt.lam < threshold:
                    subset, pair = candidate, nxt
                    trace.append(pair.lam)
                    continue
            swapped = _best_swap(form, config, subset, pair)
            if swapped is None:
                converged = True
                break
            subset, pair = swapped
            exchanges += 1
            trace.append(pair.lam)
            logger.debug("Start %d: swap lowered lambda to %.12g", start_id, pair.lam)
    except SolverError as exc:
        raise exc.with_start(start_id) from exc
    record = StartRecord(
        start_id, pair.lam, len(trace) - 1, converged, stabilized, subset, pair.degenerate, exchanges
    )
    return record, pair, tuple(trace)


def optimize(form: QuadraticForm, config: MembraneConfig) -> OptimizationResult:
    """
    Minimize the composite-membrane eigenvalue over potential sets of measure ``c``.

    Start 0 uses the bathtub set of the Dirichlet ground state; the remaining
    starts draw random sets from a generator seeded by ``(seed, start_id)``.
    Ties between starts go to the lowest start index.

    Raises:
        ParameterError: If the snapped measure is 0 or the whole domain.
        SolverError: If an eigensolve fails; the start index is attached.
    """
    domain = form.domain
    k, c_snapped = snap_measure(config.c, domain)
    if not 0 < k < domain.count:
        raise ParameterError("c", f"snapped measure {c_snapped:.6g} must lie strictly inside (0, |Omega|)")

    ground = smallest_eigenpair(form, None, 0.0, config.tol)
    initial = [bathtub_subset(ground.vector, c_snapped, config.tie_rule)]
    initial += [_random_subset(domain, k, config.seed, j) for j in range(1, config.starts)]

    runs = Parallel(n_jobs=config.threads, prefer="threads")(
        delayed(_run_start)(form, config, subset, j, ground.vector) for j, subset in enumerate(initial)
    )
    best = min(range(len(runs)), key=lambda j: (runs[j][0].value, j))
    record, pair, trace = runs[best]
    logger.info(
        "Optimized alpha=%.4g c=%.4g over %d starts: lambda=%.10g (start %d)",
        config.alpha,
        c_snapped,
        config.starts,
        record.value,
        best,
    )
    return OptimizationResult(
        value=record.value,
        u=pair.vector,
        D=record.subset,
        trace=trace,
        start_id=best,
        converged=record.converged,
        c_snapped=c_snapped,
        alpha=config.alpha,
        starts=tuple(run[0] for run in runs),
        seed=config.seed,
    )


def composite_eigenvalue(form: QuadraticForm, alpha: float, c: float, config: MembraneConfig) -> float:
    """
    ``Lambda_Omega(alpha, c)`` including the endpoint measures.

    ``c`` snapping to no cell gives the Dirichlet eigenvalue, snapping to the
    whole domain gives the Dirichlet eigenvalue plus ``alpha``.
    """
    k, _ = snap_measure(c, form.domain)
    if k == 0 or alpha == 0:
        return smallest_eigenpair(form, None, 0.0, config.tol).lam
    if k == form.n:
        return smallest_eigenpair(form, form.domain, alpha, config.tol).lam
    return optimize(form, replace(config, alpha=alpha, c=c)).value


def _chunks(iterable: Iterable[tuple[int, ...]], size: int) -> Iterable[list[tuple[int, ...]]]:
    it = iter(iterable)
    while chunk := list(itertools.islice(it, size)):
        yield chunk


def brute_force_optimum(form: QuadraticForm, alpha: float, c: float) -> tuple[float, Mask]:
    """Exhaustive minimum over all potential sets of the snapped measure, with its set."""
    n = form.n
    if n > BRUTE_FORCE_LIMIT:
        raise ParameterError("domain", f"exhaustive search limited to {BRUTE_FORCE_LIMIT} cells, got {n}")
    k, _ = snap_measure(c, form.domain)
    base = operator_matrix(form)
    best_value, best_set = np.inf, np.zeros(0, dtype=np.int64)
    for chunk in _chunks(itertools.combinations(range(n), k), _BRUTE_BATCH):
        sets = np.asarray(chunk, dtype=np.int64).reshape(len(chunk), k)
        stack = np.repeat(base[None], len(chunk), axis=0)
        if k:
            rows = np.repeat(np.arange(len(chunk)), k)
            stack[rows, sets.ravel(), sets.ravel()] += alpha
        values = np.linalg.eigvalsh(stack)[:, 0]
        j = int(np.argmin(values))
        if values[j] < best_value:
            best_value, best_set = float(values[j]), sets[j]
    return best_value, form.domain.subset(best_set)


def brute_force_lambda(form: QuadraticForm, alpha: float, c: float) -> float:
    """Exhaustive ``Lambda_Omega(alpha, c)`` for domains of at most ``BRUTE_FORCE_LIMIT`` cells."""
    return brute_force_optimum(form, alpha, c)[0]


@dataclass(frozen=True)
class SweepTable:
    """Optimal values over an (alpha, c) grid with the detected monotonicity violations."""

    alphas: tuple[float, ...]
    cs: tuple[float, ...]
    values: np.ndarray = field(repr=False)
    violations: tuple[dict, ...] = ()

    @property
    def monotone(self) -> bool:
        return not self.violations

    def rows(self) -> list[dict]:
        return [
            {"alpha": a, "c": c, "lambda": float(self.values[i, j])}
            for i, a in enumerate(self.alphas)
            for j, c in enumerate(self.cs)
        ]


def _check_sorted(name: str, values: Sequence[float]) -> None:
    if len(values) == 0:
        raise ParameterError(name, "must not be empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ParameterError(name, "must be strictly increasing")


def monotonicity_sweep(
    form: QuadraticForm,
    alphas: Sequence[float],
    cs: Sequence[float],
    config: MembraneConfig,
    slack: float = 1e-9,
) -> SweepTable:
    """
    Tabulate ``Lambda_Omega(alpha, c)`` and flag monotonicity violations.

    The value must not decrease along increasing ``alpha`` nor along
    increasing ``c``; differences beyond ``slack`` (relative) are reported.
    """
    _check_sorted("alphas", alphas)
    _check_sorted("cs", cs)
    snapped = [snap_measure(c, form.domain)[1] for c in cs]
    cells = [(i, j) for i in range(len(alphas)) for j in range(len(cs))]
    inner = replace(config, threads=1)
    results = Parallel(n_jobs=config.threads, prefer="threads")(
        delayed(composite_eigenvalue)(form, float(alphas[i]), float(cs[j]), inner) for i, j in cells
    )
    values = np.empty((len(alphas), len(cs)))
    for (i, j), value in zip(cells, results):
        values[i, j] = value

    violations = []
    for i, j in cells:
        for axis, (ni, nj) in (("alpha", (i + 1, j)), ("c", (i, j + 1))):
            if ni < len(alphas) and nj < len(cs):
                drop = values[i, j] - values[ni, nj]
                if drop > slack * max(1.0, abs(values[i, j])):
                    violations.append(
                        {"axis": axis, "alpha": float(alphas[i]), "c": snapped[j], "drop": float(drop)}
                    )
    if violations:
        logger.warning("Monotonicity sweep found %d violations", len(violations))
    return SweepTable(tuple(float(a) for a in alphas), tuple(snapped), values, tuple(violations))


def optimal_sets_agree(result: OptimizationResult, tol: float = 1e-9) -> bool:
    """Whether every start that reached the optimal value found the same set."""
    winners = [rec for rec in result.starts if rec.value <= result.value + tol * max(1.0, abs(result.value))]
    return all(rec.subset == winners[0].subset for rec in winners)


def ball_uniqueness_probe(form: QuadraticForm, config: MembraneConfig) -> dict:
    """
    Multi-start optimization on a (quasi-)ball, reporting whether the optimum is unique.

    Returns:
        A report with the optimal value, the agreement flag and per-start values.
    """
    result = optimize(form, config)
    return {
        "lambda": result.value,
        "agree": optimal_sets_agree(result, config.tol * 10),
        "c": result.c_snapped,
        "alpha": result.alpha,
        "starts": [rec.to_dict() for rec in result.starts],
    }

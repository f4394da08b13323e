"""Greedy outer loop around the sparse self-expression solver.

After a baseline solve, suspected-error entries (those whose estimated
error magnitude reaches a decaying threshold) are marked in the weight
mask, the data is corrected at marked entries by subtracting the current
error estimate, and the solver runs again on the amended problem. Marked
entries are never unmarked, so the map of suspected corruption only
grows; each inner solve starts from a fresh penalty rho0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .solver import SolverConfig, SolverDiagnostics, solve


@dataclass
class GreedyConfig:
    """Parameters of the greedy error-marking loop.

    ``alpha1``/``alpha2`` set the initial threshold from the first solve,
    ``beta`` is the geometric decay applied on later iterations, ``kappa``
    is the weight assigned to marked entries, and ``num_iters`` is the
    fixed number of refinement rounds after the baseline solve (0 means
    the baseline solve alone).
    """

    alpha1: float = 0.4
    alpha2: float = 0.5
    beta: float = 0.65
    kappa: float = 1e-4
    num_iters: int = 5

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "beta"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if self.num_iters < 0:
            raise ValueError("num_iters must be non-negative")


@dataclass
class GreedyIteration:
    """One completed solve of the loop and the state it ran under."""

    index: int
    C: np.ndarray
    E: np.ndarray
    threshold: float | None  # None for the baseline solve
    num_marked: int
    solver: SolverDiagnostics


@dataclass
class GreedyState:
    """Final loop state: corrected data, grown mask, and full history."""

    Y_current: np.ndarray
    weights: np.ndarray
    threshold: float | None
    history: list[GreedyIteration] = field(default_factory=list)


def initial_threshold(Y: np.ndarray, E: np.ndarray, cfg: GreedyConfig) -> float:
    """Threshold seeding the error map after the baseline solve.

    max(alpha1 * max|Y - E|, alpha2 * max over columns of median |column|).
    The median guard keeps the threshold from collapsing on clean data,
    where a low threshold would mark spurious errors.
    """
    residual_term = cfg.alpha1 * float(np.abs(Y - E).max()) if Y.size else 0.0
    median_term = cfg.alpha2 * float(np.median(np.abs(Y), axis=0).max()) if Y.size else 0.0
    return max(residual_term, median_term)


def update_mask(
    weights: np.ndarray, E: np.ndarray, threshold: float, kappa: float
) -> np.ndarray:
    """Mark entries whose |E| reaches the threshold; existing marks persist."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    return np.where(np.abs(E) >= threshold, kappa, weights)


def correct_data(Y: np.ndarray, E: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Subtract the error estimate at marked entries; others stay bit-identical."""
    marked = weights != 1.0
    out = Y.copy()
    out[marked] -= E[marked]
    return out


def run_gssc(
    Y: np.ndarray,
    weights0: np.ndarray | None = None,
    solver_config: SolverConfig | None = None,
    greedy_config: GreedyConfig | None = None,
) -> tuple[np.ndarray, GreedyState]:
    """Baseline solve plus ``num_iters`` greedy refinement rounds.

    ``weights0`` carries prior knowledge (kappa at known-bad entries such
    as erasures); ``None`` means no prior marks. Each refinement round
    updates the threshold (from the first solve's error estimate, then by
    geometric decay), extends the mask with the latest error estimate,
    corrects the data at all marked entries, and re-solves with a fresh
    penalty schedule. Returns the final coefficient matrix and the full
    per-iteration history; with ``num_iters=0`` the result is exactly the
    plain solver output under ``weights0``.
    """
    solver_config = solver_config or SolverConfig()
    greedy_config = greedy_config or GreedyConfig()

    Y_cur = np.asarray(Y, dtype=float).copy()
    weights = (
        np.ones(Y_cur.shape) if weights0 is None else np.asarray(weights0, dtype=float).copy()
    )

    result = solve(Y_cur, weights, solver_config)
    history = [
        GreedyIteration(
            index=0,
            C=result.C,
            E=result.E,
            threshold=None,
            num_marked=int((weights != 1.0).sum()),
            solver=result.diagnostics,
        )
    ]

    threshold = None
    for n in range(1, greedy_config.num_iters + 1):
        if n == 1:
            threshold = initial_threshold(Y_cur, result.E, greedy_config)
        else:
            threshold = greedy_config.beta * threshold
        weights = update_mask(weights, result.E, threshold, greedy_config.kappa)
        Y_cur = correct_data(Y_cur, result.E, weights)

        result = solve(Y_cur, weights, solver_config)
        history.append(
            GreedyIteration(
                index=n,
                C=result.C,
                E=result.E,
                threshold=threshold,
                num_marked=int((weights != 1.0).sum()),
                solver=result.diagnostics,
            )
        )

    state = GreedyState(
        Y_current=Y_cur, weights=weights, threshold=threshold, history=history
    )
    return result.C, state


HISTORY_COLUMNS = (
    "iteration",
    "num_marked",
    "threshold",
    "solver_iters",
    "affine_gap",
    "coupling_gap",
    "a_change",
    "e_change",
)


def history_rows(state: GreedyState) -> list[tuple]:
    """Flatten the loop history into CSV-ready rows."""
    rows = []
    for it in state.history:
        res = it.solver.residuals
        rows.append(
            (
                it.index,
                it.num_marked,
                "" if it.threshold is None else it.threshold,
                it.solver.iterations,
                res.affine_gap,
                res.coupling_gap,
                res.a_change,
                res.e_change,
            )
        )
    return rows


def write_history(state: GreedyState, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        writer.writerows(history_rows(state))

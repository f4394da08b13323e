"""Clustering quality metrics and experiment-row bookkeeping.

Misclassification is scored under the best matching of predicted to true
labels, so any relabeling of the same partition scores identically.
Trial rows carry enough metadata (including the seed) to re-run any
single row, and aggregate into per-cell means for sweep summaries.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

# Exact enumeration is cheap up to 6! permutations; Hungarian above.
BRUTE_FORCE_MAX_CLUSTERS = 6


@dataclass
class MisclassificationResult:
    rate: float
    best_permutation: tuple[int, ...]  # predicted label -> true label
    confusion: np.ndarray  # confusion[p, t] = #(pred == p and truth == t)


def confusion_matrix(pred: np.ndarray, truth: np.ndarray, num_clusters: int) -> np.ndarray:
    counts = np.zeros((num_clusters, num_clusters), dtype=int)
    np.add.at(counts, (pred, truth), 1)
    return counts


def misclassification(
    pred, truth, num_clusters: int
) -> MisclassificationResult:
    """Fraction of points mislabeled under the best label matching.

    The minimum over all permutations of predicted labels is exact:
    enumerated for small cluster counts, solved as an assignment problem
    otherwise.
    """
    pred = np.asarray(pred, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError("label vectors must be 1-D and of equal length")
    if pred.size == 0:
        raise ValueError("label vectors must be non-empty")
    for name, vec in (("pred", pred), ("truth", truth)):
        if vec.min() < 0 or vec.max() >= num_clusters:
            raise ValueError(f"{name} labels must lie in [0, {num_clusters})")

    counts = confusion_matrix(pred, truth, num_clusters)
    n = pred.size
    if num_clusters <= BRUTE_FORCE_MAX_CLUSTERS:
        best_correct, best_perm = -1, None
        for perm in permutations(range(num_clusters)):
            correct = int(sum(counts[p, perm[p]] for p in range(num_clusters)))
            if correct > best_correct:
                best_correct, best_perm = correct, perm
    else:
        rows, cols = linear_sum_assignment(-counts)
        best_perm = tuple(int(cols[list(rows).index(p)]) for p in range(num_clusters))
        best_correct = int(counts[rows, cols].sum())

    return MisclassificationResult(
        rate=1.0 - best_correct / n,
        best_permutation=best_perm,
        confusion=counts,
    )


# ---------------------------------------------------------------------------
# Trial records and aggregation


@dataclass
class TrialRecord:
    """One experiment row; ``trial_seed`` makes the row re-runnable."""

    theta_deg: float
    p_err: float
    p_ers: float
    snr_db: float | None
    algorithm: str
    greedy_iters: int
    trial_seed: int
    misclassification: float
    solver_iters: int = 0
    seconds: float = 0.0

    def cell_key(self):
        return (
            self.theta_deg,
            self.p_err,
            self.p_ers,
            math.inf if self.snr_db is None else self.snr_db,
            self.algorithm,
            self.greedy_iters,
        )


CSV_COLUMNS = (
    "theta",
    "p_err",
    "p_ers",
    "snr_db",
    "algorithm",
    "greedy_iters",
    "trial_seed",
    "misclassification",
    "solver_iters",
    "seconds",
)


def record_to_row(rec: TrialRecord) -> list[str]:
    return [
        repr(rec.theta_deg),
        repr(rec.p_err),
        repr(rec.p_ers),
        "" if rec.snr_db is None else repr(rec.snr_db),
        rec.algorithm,
        str(rec.greedy_iters),
        str(rec.trial_seed),
        repr(rec.misclassification),
        str(rec.solver_iters),
        repr(rec.seconds),
    ]


def row_to_record(row: dict[str, str]) -> TrialRecord:
    snr = row.get("snr_db", "")
    return TrialRecord(
        theta_deg=float(row["theta"]),
        p_err=float(row["p_err"]),
        p_ers=float(row["p_ers"]),
        snr_db=None if snr == "" else float(snr),
        algorithm=row["algorithm"],
        greedy_iters=int(row["greedy_iters"]),
        trial_seed=int(row["trial_seed"]),
        misclassification=float(row["misclassification"]),
        solver_iters=int(row.get("solver_iters", 0) or 0),
        seconds=float(row.get("seconds", 0.0) or 0.0),
    )


def write_records(records, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(record_to_row(rec))


def read_records(path: str) -> list[TrialRecord]:
    with open(path, newline="") as fh:
        return [row_to_record(row) for row in csv.DictReader(fh)]


@dataclass
class CellSummary:
    theta_deg: float
    p_err: float
    p_ers: float
    snr_db: float | None
    algorithm: str
    greedy_iters: int
    mean: float
    sd: float  # sample standard deviation (n-1); nan for a single trial
    count: int


def aggregate_trials(records) -> list[CellSummary]:
    """Mean and sample standard deviation per parameter cell.

    Cells are keyed by (theta, p_err, p_ers, snr, algorithm, greedy
    iterations) and returned in sorted key order.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to aggregate")
    cells: dict[tuple, list[TrialRecord]] = {}
    for rec in records:
        cells.setdefault(rec.cell_key(), []).append(rec)

    summaries = []
    for key in sorted(cells):
        group = cells[key]
        rates = np.array([r.misclassification for r in group])
        first = group[0]
        summaries.append(
            CellSummary(
                theta_deg=first.theta_deg,
                p_err=first.p_err,
                p_ers=first.p_ers,
                snr_db=first.snr_db,
                algorithm=first.algorithm,
                greedy_iters=first.greedy_iters,
                mean=float(rates.mean()),
                sd=float(rates.std(ddof=1)) if len(rates) > 1 else float("nan"),
                count=len(rates),
            )
        )
    return summaries


SUMMARY_COLUMNS = (
    "theta",
    "p_err",
    "p_ers",
    "snr_db",
    "algorithm",
    "greedy_iters",
    "mean_misclassification",
    "sd",
    "count",
)


def write_summary(summaries, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            writer.writerow(
                [
                    repr(s.theta_deg),
                    repr(s.p_err),
                    repr(s.p_ers),
                    "" if s.snr_db is None else repr(s.snr_db),
                    s.algorithm,
                    str(s.greedy_iters),
                    repr(s.mean),
                    repr(s.sd),
                    str(s.count),
                ]
            )

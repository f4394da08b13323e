"""Sparse subspace clustering with greedy error and erasure correction.

Pipeline: a weighted ADMM solver finds a sparse self-expression of the
data columns (``solver``), a greedy outer loop grows an error map and
corrects the data between solves (``greedy``), the coefficient matrix is
clustered spectrally (``spectral``), and results are scored and swept
over corruption grids (``metrics``, ``harness``). ``synthetic`` provides
the multi-subspace benchmark generator.
"""

from .greedy import GreedyConfig, GreedyState, run_gssc
from .harness import SweepSpec, mix64, run_sweep, run_trial
from .metrics import TrialRecord, aggregate_trials, misclassification
from .solver import Lambdas, SolverConfig, compute_lambdas, normalize_columns, shrink, solve
from .spectral import build_affinity, cluster
from .synthetic import (
    CorruptionSpec,
    SubspaceModel,
    SyntheticDataset,
    build_bases,
    generate_dataset,
    inject_corruption,
    load_dataset,
    sample_points,
    save_dataset,
)

__all__ = [
    "CorruptionSpec",
    "GreedyConfig",
    "GreedyState",
    "Lambdas",
    "SolverConfig",
    "SubspaceModel",
    "SweepSpec",
    "SyntheticDataset",
    "TrialRecord",
    "aggregate_trials",
    "build_affinity",
    "build_bases",
    "cluster",
    "compute_lambdas",
    "generate_dataset",
    "inject_corruption",
    "load_dataset",
    "misclassification",
    "mix64",
    "normalize_columns",
    "run_gssc",
    "run_sweep",
    "run_trial",
    "sample_points",
    "save_dataset",
    "shrink",
    "solve",
]

__version__ = "0.1.0"

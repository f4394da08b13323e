"""Experiment orchestration: single trials, parameter sweeps, summaries.

A trial is a pure function of its parameters and a 64-bit seed: generate
a synthetic dataset, run the requested algorithm, spectrally cluster the
coefficient matrix, and score misclassification against ground truth.
Sweeps fan independent trials out to a process pool, append rows through
the single parent process, skip already-completed work on resume, and
emit a standalone plotting script alongside the raw and summarized CSVs.

Seed derivation (documented so external tools can reproduce any row):
``trial_seed = mix64(seed_base, cell_index, trial_index)`` where
``mix64`` folds each part into a running state via
``state = splitmix64(state XOR part)`` and splitmix64 is the standard
finalizer (add 0x9E3779B97F4A7C15; xor-shift 30, multiply
0xBF58476D1CE4E5B9; xor-shift 27, multiply 0x94D049BB133111EB;
xor-shift 31). Cells enumerate theta-major, then p_err, then p_ers.
The dataset generator is seeded with ``trial_seed`` itself and k-means
with ``mix64(trial_seed, 1)``.
"""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace

from .greedy import GreedyConfig, run_gssc
from .metrics import (
    CSV_COLUMNS,
    TrialRecord,
    aggregate_trials,
    misclassification,
    read_records,
    record_to_row,
    write_summary,
)
from .solver import SolverConfig, normalize_columns, solve
from .spectral import build_affinity, cluster
from .synthetic import DEFAULT_AMBIENT_DIM, DEFAULT_PER_SUBSPACE, generate_dataset

ALGORITHMS = ("ssc", "gssc")
SPECTRAL_STREAM = 1  # tag mixed into trial_seed for the k-means stream

MAX_JOBS_ENV = "GSSC_MAX_JOBS"

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mix64(base: int, *parts: int) -> int:
    """Fold integer parts into a 64-bit seed, splitmix64-style."""
    state = base & _MASK64
    for part in parts:
        state = _splitmix64(state ^ (part & _MASK64))
    return state


@dataclass
class SweepSpec:
    """A grid of corruption settings crossed with trials and algorithms."""

    theta_list: list[float] = field(default_factory=lambda: [60.0])
    p_err_list: list[float] = field(default_factory=lambda: [0.0])
    p_ers_list: list[float] = field(default_factory=lambda: [0.0])
    snr_db: float | None = None
    trials: int = 20
    algorithms: tuple[str, ...] = ("ssc", "gssc")
    greedy_iters: int = 5
    seed_base: int = 0
    per_subspace: int = DEFAULT_PER_SUBSPACE
    ambient_dim: int = DEFAULT_AMBIENT_DIM
    solver: SolverConfig = field(default_factory=SolverConfig)
    greedy: GreedyConfig = field(default_factory=GreedyConfig)

    def __post_init__(self):
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {name!r}")
        if self.trials < 1:
            raise ValueError("trials must be positive")

    def cells(self) -> list[tuple[int, float, float, float]]:
        """Enumerate (cell_index, theta, p_err, p_ers), theta-major."""
        out = []
        idx = 0
        for theta in self.theta_list:
            for p_err in self.p_err_list:
                for p_ers in self.p_ers_list:
                    out.append((idx, theta, p_err, p_ers))
                    idx += 1
        return out


def run_trial(
    theta_deg: float,
    p_err: float,
    p_ers: float,
    snr_db: float | None,
    algorithm: str,
    greedy_iters: int,
    trial_seed: int,
    solver_config: SolverConfig | None = None,
    greedy_config: GreedyConfig | None = None,
    per_subspace: int = DEFAULT_PER_SUBSPACE,
    ambient_dim: int = DEFAULT_AMBIENT_DIM,
    normalize: bool = True,
) -> list[TrialRecord]:
    """Run one seeded trial end to end and return its record rows.

    Data columns are scaled to unit norm before solving (labels are
    invariant to per-column scaling). The plain algorithm yields a
    single row. The greedy algorithm yields one row per completed loop
    iteration (0 = baseline solve), each scored by clustering that
    iteration's coefficient matrix, so a sweep captures the whole
    refinement trajectory.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    solver_config = solver_config or SolverConfig()
    greedy_config = greedy_config or GreedyConfig()

    ds = generate_dataset(
        theta_deg,
        p_err=p_err,
        p_ers=p_ers,
        snr_db=snr_db,
        seed=trial_seed,
        per_subspace=per_subspace,
        ambient_dim=ambient_dim,
        kappa=greedy_config.kappa,
    )
    Y = normalize_columns(ds.Y) if normalize else ds.Y
    spectral_seed = mix64(trial_seed, SPECTRAL_STREAM)

    def score(C):
        start = time.perf_counter()
        labels = cluster(build_affinity(C), ds.num_subspaces, spectral_seed).labels
        rate = misclassification(labels, ds.labels, ds.num_subspaces).rate
        return rate, time.perf_counter() - start

    records = []
    if algorithm == "ssc":
        result = solve(Y, ds.weights, solver_config)
        rate, cluster_secs = score(result.C)
        records.append(
            TrialRecord(
                theta_deg=theta_deg,
                p_err=p_err,
                p_ers=p_ers,
                snr_db=snr_db,
                algorithm="ssc",
                greedy_iters=0,
                trial_seed=trial_seed,
                misclassification=rate,
                solver_iters=result.diagnostics.iterations,
                seconds=result.diagnostics.seconds + cluster_secs,
            )
        )
    else:
        greedy_config = replace(greedy_config, num_iters=greedy_iters)
        _, state = run_gssc(Y, ds.weights, solver_config, greedy_config)
        for it in state.history:
            rate, cluster_secs = score(it.C)
            records.append(
                TrialRecord(
                    theta_deg=theta_deg,
                    p_err=p_err,
                    p_ers=p_ers,
                    snr_db=snr_db,
                    algorithm="gssc",
                    greedy_iters=it.index,
                    trial_seed=trial_seed,
                    misclassification=rate,
                    solver_iters=it.solver.iterations,
                    seconds=it.solver.seconds + cluster_secs,
                )
            )
    return records


def _trial_task(args):
    (cell_idx, theta, p_err, p_ers, algorithm, trial_idx, spec) = args
    trial_seed = mix64(spec.seed_base, cell_idx, trial_idx)
    return run_trial(
        theta,
        p_err,
        p_ers,
        spec.snr_db,
        algorithm,
        spec.greedy_iters,
        trial_seed,
        spec.solver,
        spec.greedy,
        spec.per_subspace,
        spec.ambient_dim,
    )


def _completion_key(rec: TrialRecord):
    return (
        rec.theta_deg,
        rec.p_err,
        rec.p_ers,
        rec.snr_db,
        rec.algorithm,
        rec.trial_seed,
    )


def _expected_final_iter(algorithm: str, spec: SweepSpec) -> int:
    return spec.greedy_iters if algorithm == "gssc" else 0


def effective_jobs(requested: int) -> int:
    cap = os.environ.get(MAX_JOBS_ENV)
    jobs = max(1, requested)
    if cap:
        jobs = min(jobs, max(1, int(cap)))
    return jobs


def run_sweep(
    spec: SweepSpec,
    out_dir: str,
    jobs: int = 1,
    progress=None,
) -> list[TrialRecord]:
    """Run (or resume) a sweep, writing results.csv, summary.csv and a plot script.

    A (cell, trial, algorithm) task is considered complete when its
    final-iteration row exists in results.csv; complete tasks are skipped
    on resume and partial rows are dropped. Failed tasks are logged and
    the sweep continues. Rows are appended by this process only.
    """
    os.makedirs(out_dir, exist_ok=True)
    results_path = os.path.join(out_dir, "results.csv")
    summary_path = os.path.join(out_dir, "summary.csv")

    existing: list[TrialRecord] = []
    if os.path.exists(results_path):
        existing = read_records(results_path)

    final_rows = {
        _completion_key(rec)
        for rec in existing
        if rec.greedy_iters == _expected_final_iter(rec.algorithm, spec)
    }
    completed_rows = [rec for rec in existing if _completion_key(rec) in final_rows]

    tasks = []
    for cell_idx, theta, p_err, p_ers in spec.cells():
        for algorithm in spec.algorithms:
            for trial_idx in range(spec.trials):
                trial_seed = mix64(spec.seed_base, cell_idx, trial_idx)
                key = (theta, p_err, p_ers, spec.snr_db, algorithm, trial_seed)
                if key in final_rows:
                    continue
                tasks.append((cell_idx, theta, p_err, p_ers, algorithm, trial_idx, spec))

    # Rewrite the file without orphaned partial rows before appending.
    with open(results_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in completed_rows:
            writer.writerow(record_to_row(rec))

    records = list(completed_rows)
    jobs = effective_jobs(jobs)
    done = 0
    with open(results_path, "a", newline="") as fh:
        writer = csv.writer(fh)

        def consume(batch):
            nonlocal done
            for rec in batch:
                writer.writerow(record_to_row(rec))
                records.append(rec)
            fh.flush()
            done += 1
            if progress:
                progress(done, len(tasks))

        if jobs == 1:
            for task in tasks:
                try:
                    consume(_trial_task(task))
                except Exception as exc:  # noqa: BLE001 - sweep must continue
                    _log_failure(out_dir, task, exc)
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = {pool.submit(_trial_task, t): t for t in tasks}
                for fut in as_completed(futures):
                    try:
                        consume(fut.result())
                    except Exception as exc:  # noqa: BLE001
                        _log_failure(out_dir, futures[fut], exc)

    if records:
        write_summary(aggregate_trials(records), summary_path)
    write_plot_script(out_dir)
    return records


def _log_failure(out_dir, task, exc):
    cell_idx, theta, p_err, p_ers, algorithm, trial_idx, _ = task
    with open(os.path.join(out_dir, "failures.log"), "a") as fh:
        fh.write(
            f"cell={cell_idx} theta={theta} p_err={p_err} p_ers={p_ers} "
            f"algorithm={algorithm} trial={trial_idx}: {exc!r}\n"
        )


def summarize_file(results_path: str, summary_path: str) -> None:
    """Regenerate a summary from a results file (deterministic output)."""
    write_summary(aggregate_trials(read_records(results_path)), summary_path)


# ---------------------------------------------------------------------------
# Plain-text key=value configuration files


def parse_kv_file(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment; values keep commas."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _floats(raw: str) -> list[float]:
    return [float(tok) for tok in raw.split(",") if tok.strip() != ""]


def _opt_float(raw: str | None):
    if raw is None or raw.lower() in ("", "none"):
        return None
    return float(raw)


def sweep_spec_from_config(cfg: dict[str, str]) -> SweepSpec:
    """Build a SweepSpec from parsed key=value pairs.

    Recognized keys: theta, p_err, p_ers (comma lists), snr_db, trials,
    algorithms, greedy_iters, seed_base, per_subspace, ambient_dim, plus
    any SolverConfig/GreedyConfig field name as an override.
    """
    spec = SweepSpec()
    solver_kwargs: dict = {}
    greedy_kwargs: dict = {}
    for key, raw in cfg.items():
        if key == "theta":
            spec.theta_list = _floats(raw)
        elif key == "p_err":
            spec.p_err_list = _floats(raw)
        elif key == "p_ers":
            spec.p_ers_list = _floats(raw)
        elif key == "snr_db":
            spec.snr_db = _opt_float(raw)
        elif key == "trials":
            spec.trials = int(raw)
        elif key == "algorithms":
            spec.algorithms = tuple(tok.strip().lower() for tok in raw.split(","))
        elif key == "greedy_iters":
            spec.greedy_iters = int(raw)
        elif key == "seed_base":
            spec.seed_base = int(raw)
        elif key == "per_subspace":
            spec.per_subspace = int(raw)
        elif key == "ambient_dim":
            spec.ambient_dim = int(raw)
        elif key in ("alpha_e", "alpha_z", "rho0", "mu", "epsilon"):
            solver_kwargs[key] = float(raw)
        elif key == "max_iters":
            solver_kwargs[key] = int(raw)
        elif key == "affine":
            solver_kwargs[key] = raw.lower() in ("1", "true", "yes")
        elif key == "method":
            solver_kwargs[key] = raw
        elif key in ("alpha1", "alpha2", "beta", "kappa"):
            greedy_kwargs[key] = float(raw)
        else:
            raise ValueError(f"unknown sweep config key {key!r}")
    spec.solver = replace(spec.solver, **solver_kwargs)
    spec.greedy = replace(spec.greedy, **greedy_kwargs)
    spec.__post_init__()
    return spec


PLOT_SCRIPT_NAME = "plot_phase_grids.py"

_PLOT_SCRIPT = '''\
#!/usr/bin/env python3
"""Render misclassification heat maps from a sweep summary.

Auto-generated alongside the sweep output; needs matplotlib.
Usage: python plot_phase_grids.py [summary.csv] [output-directory]
"""
import csv
import sys
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

summary_path = sys.argv[1] if len(sys.argv) > 1 else "summary.csv"
out_dir = sys.argv[2] if len(sys.argv) > 2 else "."

rows = list(csv.DictReader(open(summary_path, newline="")))
final_iter = defaultdict(int)
for r in rows:
    key = (r["theta"], r["algorithm"])
    final_iter[key] = max(final_iter[key], int(r["greedy_iters"]))

panels = defaultdict(dict)
for r in rows:
    key = (r["theta"], r["algorithm"])
    if int(r["greedy_iters"]) != final_iter[key]:
        continue
    panels[key][(float(r["p_err"]), float(r["p_ers"]))] = float(
        r["mean_misclassification"]
    )

for (theta, algorithm), cells in sorted(panels.items()):
    p_errs = sorted({k[0] for k in cells})
    p_erss = sorted({k[1] for k in cells})
    grid = np.full((len(p_errs), len(p_erss)), np.nan)
    for (pe, ps), value in cells.items():
        grid[p_errs.index(pe), p_erss.index(ps)] = value
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(grid, origin="lower", vmin=0, vmax=0.7, cmap="gray_r", aspect="auto")
    ax.set_xticks(range(len(p_erss)), [f"{v:g}" for v in p_erss])
    ax.set_yticks(range(len(p_errs)), [f"{v:g}" for v in p_errs])
    ax.set_xlabel("erasure probability")
    ax.set_ylabel("error probability")
    ax.set_title(f"{algorithm.upper()}, theta={theta}")
    fig.colorbar(im, ax=ax, label="mean misclassification")
    fig.tight_layout()
    name = f"phase_{algorithm}_theta{theta}.png"
    fig.savefig(f"{out_dir}/{name}", dpi=150)
    print("wrote", name)
'''


def write_plot_script(out_dir: str) -> str:
    path = os.path.join(out_dir, PLOT_SCRIPT_NAME)
    with open(path, "w") as fh:
        fh.write(_PLOT_SCRIPT)
    return path

"""Command-line interface: generate datasets, run solves, sweep, summarize."""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .greedy import GreedyConfig, run_gssc, write_history
from .harness import (
    SPECTRAL_STREAM,
    mix64,
    parse_kv_file,
    run_sweep,
    summarize_file,
    sweep_spec_from_config,
)
from .metrics import TrialRecord, misclassification, read_records, write_records
from .solver import SolverConfig, normalize_columns, solve
from .spectral import build_affinity, cluster
from .synthetic import generate_dataset, load_dataset, save_dataset


def _add_solver_flags(parser):
    parser.add_argument("--alpha-e", type=float, default=5.0)
    parser.add_argument("--alpha-z", type=float, default=50.0)
    parser.add_argument("--rho0", type=float, default=10.0)
    parser.add_argument("--mu", type=float, default=1.05)
    parser.add_argument("--epsilon", type=float, default=1e-3)
    parser.add_argument("--max-iters", type=int, default=200)
    parser.add_argument("--affine", action="store_true")
    parser.add_argument("--method", choices=("woodbury", "dense"), default="woodbury")


def _add_greedy_flags(parser):
    parser.add_argument("--alpha1", type=float, default=0.4)
    parser.add_argument("--alpha2", type=float, default=0.5)
    parser.add_argument("--beta", type=float, default=0.65)
    parser.add_argument("--kappa", type=float, default=1e-4)
    parser.add_argument("--greedy-iters", type=int, default=5)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        alpha_e=args.alpha_e,
        alpha_z=args.alpha_z,
        rho0=args.rho0,
        mu=args.mu,
        epsilon=args.epsilon,
        max_iters=args.max_iters,
        affine=args.affine,
        method=args.method,
    )


def _greedy_config(args) -> GreedyConfig:
    return GreedyConfig(
        alpha1=args.alpha1,
        alpha2=args.alpha2,
        beta=args.beta,
        kappa=args.kappa,
        num_iters=args.greedy_iters,
    )


def cmd_generate(args) -> int:
    cfg = parse_kv_file(args.config)

    def opt(key, default=None):
        raw = cfg.get(key)
        if raw is None or raw.lower() == "none":
            return default
        return raw

    ds = generate_dataset(
        theta_deg=float(cfg.get("theta", 60.0)),
        p_err=float(cfg.get("p_err", 0.0)),
        p_ers=float(cfg.get("p_ers", 0.0)),
        snr_db=None if opt("snr_db") is None else float(cfg["snr_db"]),
        seed=None if opt("seed") is None else int(cfg["seed"]),
        per_subspace=int(cfg.get("per_subspace", 35)),
        ambient_dim=int(cfg.get("ambient_dim", 50)),
        kappa=float(cfg.get("kappa", 1e-4)),
    )
    save_dataset(ds, args.outdir)
    print(f"wrote {ds.ambient_dim}x{ds.num_points} dataset to {args.outdir}")
    return 0


def cmd_solve(args) -> int:
    ds = load_dataset(args.dataset)
    solver_cfg = _solver_config(args)
    Y = ds.Y if args.no_normalize else normalize_columns(ds.Y)

    seed = args.seed
    if seed is None:
        seed = 0 if ds.seed is None else ds.seed
    spectral_seed = mix64(seed, SPECTRAL_STREAM)

    if args.algorithm == "ssc":
        result = solve(Y, ds.weights, solver_cfg)
        C = result.C
        solver_iters = result.diagnostics.iterations
        seconds = result.diagnostics.seconds
        greedy_iters = 0
        if args.solver_log:
            with open(args.solver_log, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(result.diagnostics.HISTORY_COLUMNS)
                writer.writerows(result.diagnostics.history_rows())
    else:
        greedy_cfg = _greedy_config(args)
        C, state = run_gssc(Y, ds.weights, solver_cfg, greedy_cfg)
        solver_iters = state.history[-1].solver.iterations
        seconds = sum(it.solver.seconds for it in state.history)
        greedy_iters = greedy_cfg.num_iters
        if args.history:
            write_history(state, args.history)

    assignment = cluster(build_affinity(C), ds.num_subspaces, spectral_seed)
    np.savetxt(args.labels_out, assignment.labels, fmt="%d")
    print(f"wrote predicted labels to {args.labels_out}")
    if args.spectrum:
        np.savetxt(args.spectrum, assignment.eigenvalues)

    rate = misclassification(assignment.labels, ds.labels, ds.num_subspaces).rate
    print(f"misclassification={rate!r}")

    if args.record:
        existing = read_records(args.record) if os.path.exists(args.record) else []
        existing.append(
            TrialRecord(
                theta_deg=ds.theta_deg,
                p_err=ds.p_err,
                p_ers=ds.p_ers,
                snr_db=ds.snr_db,
                algorithm=args.algorithm,
                greedy_iters=greedy_iters,
                trial_seed=seed,
                misclassification=rate,
                solver_iters=solver_iters,
                seconds=seconds,
            )
        )
        write_records(existing, args.record)
    return 0


def cmd_sweep(args) -> int:
    spec = sweep_spec_from_config(parse_kv_file(args.config))

    def progress(done, total):
        if args.quiet:
            return
        print(f"\rtrials {done}/{total}", end="", file=sys.stderr, flush=True)

    records = run_sweep(spec, args.out_dir, jobs=args.jobs, progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
    print(f"{len(records)} rows in {args.out_dir}/results.csv")
    return 0


def cmd_summarize(args) -> int:
    summarize_file(args.results, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gssc",
        description="Sparse subspace clustering with greedy error correction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate a synthetic dataset directory")
    p_gen.add_argument("config", help="key=value config file")
    p_gen.add_argument("outdir")
    p_gen.set_defaults(func=cmd_generate)

    p_solve = sub.add_parser("solve", help="cluster one dataset directory")
    p_solve.add_argument("dataset")
    p_solve.add_argument("--algorithm", choices=("ssc", "gssc"), default="gssc")
    p_solve.add_argument("--seed", type=int, default=None, help="defaults to the dataset seed")
    p_solve.add_argument("--labels-out", default="predicted_labels.csv")
    p_solve.add_argument("--record", default=None, help="append a trial row to this CSV")
    p_solve.add_argument("--history", default=None, help="write greedy per-iteration CSV")
    p_solve.add_argument("--solver-log", default=None, help="write solver residuals CSV (ssc)")
    p_solve.add_argument(
        "--no-normalize", action="store_true", help="skip unit-norm column scaling"
    )
    p_solve.add_argument(
        "--spectrum", default=None, help="write the Laplacian eigenvalue spectrum here"
    )
    _add_solver_flags(p_solve)
    _add_greedy_flags(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep from a config file")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--out-dir", default="sweep_out")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--quiet", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)

    p_sum = sub.add_parser("summarize", help="aggregate a results CSV into cell means")
    p_sum.add_argument("results")
    p_sum.add_argument("--out", default="summary.csv")
    p_sum.set_defaults(func=cmd_summarize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

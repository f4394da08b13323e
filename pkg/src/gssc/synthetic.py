"""Synthetic multi-subspace benchmark data.

Generates unions of low-dimensional linear subspaces with a controllable
smallest angle between them, samples points with Gaussian coefficients,
and injects three kinds of corruption: dense Gaussian noise, sparse
additive errors at unknown positions, and erasures (entries zeroed at
known positions). Erasure positions are recorded in a per-entry weight
mask so downstream solvers can down-weight them.

All randomness flows through ``numpy.random.Generator``; identical seeds
produce bitwise-identical datasets.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

DEFAULT_AMBIENT_DIM = 50
DEFAULT_PER_SUBSPACE = 35
DEFAULT_KAPPA = 1e-4

MANIFEST_NAME = "manifest.txt"


@dataclass
class SubspaceModel:
    """Union of low-dimensional linear subspaces of R^D.

    ``bases[l]`` is a D x d_l matrix with orthonormal columns spanning
    subspace l.
    """

    ambient_dim: int
    theta_deg: float
    bases: list[np.ndarray]

    @property
    def num_subspaces(self) -> int:
        return len(self.bases)

    @property
    def subspace_dims(self) -> list[int]:
        return [b.shape[1] for b in self.bases]


@dataclass
class CorruptionSpec:
    """Per-entry corruption probabilities and noise level.

    ``snr_db`` is the signal-to-noise ratio in dB (noise RMS equals
    ``10**(-snr_db/20)`` times the data RMS); ``None`` disables noise.
    Error and erasure positions are drawn independently per entry.
    """

    p_err: float = 0.0
    p_ers: float = 0.0
    snr_db: float | None = None
    seed: int | None = None
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self):
        if not (0.0 <= self.p_err <= 1.0 and 0.0 <= self.p_ers <= 1.0):
            raise ValueError("corruption probabilities must lie in [0, 1]")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")


@dataclass
class SyntheticDataset:
    """A (possibly corrupted) D x N sample matrix with ground truth.

    ``weights`` is the per-entry confidence mask consumed by the solver:
    1 at regular entries, ``kappa`` at erased ones. ``true_errors``
    records the additive error values as drawn (before erasure zeroing);
    ``erasure_mask``/``error_mask`` record the corrupted positions.
    """

    Y: np.ndarray
    labels: np.ndarray
    weights: np.ndarray
    true_errors: np.ndarray
    erasure_mask: np.ndarray
    error_mask: np.ndarray
    theta_deg: float
    num_subspaces: int
    kappa: float = DEFAULT_KAPPA
    seed: int | None = None
    p_err: float = 0.0
    p_ers: float = 0.0
    snr_db: float | None = None

    @property
    def ambient_dim(self) -> int:
        return self.Y.shape[0]

    @property
    def num_points(self) -> int:
        return self.Y.shape[1]


def haar_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a uniformly distributed (Haar) random orthogonal matrix.

    QR of a Gaussian matrix with the sign of R's diagonal folded into Q,
    which removes the sign ambiguity that would bias plain QR.
    """
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def build_bases(
    theta_deg: float,
    rng: np.random.Generator | int | None = None,
    ambient_dim: int = DEFAULT_AMBIENT_DIM,
) -> SubspaceModel:
    """Construct three 4-dimensional subspaces with pairwise angle geometry.

    The leading basis vectors of the three subspaces lie in a common
    2D plane at angles theta (1-2), theta (2-3) and 2*theta (1-3).
    The remaining three basis vectors of subspaces 1 and 2 are mutually
    orthogonal and orthogonal to that plane; subspace 3 takes the
    normalized sums of the corresponding pairs, so each subspace lies in
    the direct sum of the other two. At theta=0 all three share a line.

    The 8-dimensional frame carrying the construction is drawn at random
    from ``rng``, so the model orientation is seed-dependent.
    """
    if not (0.0 <= theta_deg < 90.0):
        raise ValueError(f"theta must lie in [0, 90) degrees, got {theta_deg}")
    if ambient_dim < 11:
        raise ValueError(f"ambient_dim must be at least 11, got {ambient_dim}")
    rng = np.random.default_rng(rng)

    # Random orthonormal 8-frame: columns 0-1 span the shared plane,
    # columns 2-7 are the mutually orthogonal directions.
    frame, _ = np.linalg.qr(rng.standard_normal((ambient_dim, 8)))
    p1, p2 = frame[:, 0], frame[:, 1]
    ortho = frame[:, 2:]

    theta = np.deg2rad(theta_deg)
    lead2 = p1
    lead1 = np.cos(theta) * p1 - np.sin(theta) * p2
    lead3 = np.cos(theta) * p1 + np.sin(theta) * p2

    basis1 = np.column_stack([lead1, ortho[:, 0], ortho[:, 1], ortho[:, 2]])
    basis2 = np.column_stack([lead2, ortho[:, 3], ortho[:, 4], ortho[:, 5]])
    basis3 = np.column_stack(
        [lead3] + [(basis1[:, j] + basis2[:, j]) / np.sqrt(2.0) for j in (1, 2, 3)]
    )
    return SubspaceModel(ambient_dim, theta_deg, [basis1, basis2, basis3])


def smallest_angle_cos(basis_a: np.ndarray, basis_b: np.ndarray) -> float:
    """Cosine of the smallest principal angle between two subspaces.

    Equals the maximum correlation between unit vectors of the two spans,
    i.e. the largest singular value of ``basis_a.T @ basis_b`` for
    orthonormal bases.
    """
    return float(np.linalg.svd(basis_a.T @ basis_b, compute_uv=False)[0])


def sample_points(
    model: SubspaceModel,
    per_subspace: int = DEFAULT_PER_SUBSPACE,
    rng: np.random.Generator | int | None = None,
) -> SyntheticDataset:
    """Sample clean points from each subspace with standard normal coefficients.

    A single Haar-random orthogonal matrix is applied to the assembled
    block matrix so the ambient coordinates carry no special structure.
    Labels are assigned block-wise.
    """
    if per_subspace < 1:
        raise ValueError("per_subspace must be positive")
    rng = np.random.default_rng(rng)

    blocks = []
    labels = []
    for l, basis in enumerate(model.bases):
        coeffs = rng.standard_normal((basis.shape[1], per_subspace))
        blocks.append(basis @ coeffs)
        labels.extend([l] * per_subspace)
    rotation = haar_orthogonal(model.ambient_dim, rng)
    Y = rotation @ np.hstack(blocks)

    shape = Y.shape
    return SyntheticDataset(
        Y=Y,
        labels=np.asarray(labels, dtype=int),
        weights=np.ones(shape),
        true_errors=np.zeros(shape),
        erasure_mask=np.zeros(shape, dtype=bool),
        error_mask=np.zeros(shape, dtype=bool),
        theta_deg=model.theta_deg,
        num_subspaces=model.num_subspaces,
    )


def inject_corruption(
    ds: SyntheticDataset,
    spec: CorruptionSpec,
    rng: np.random.Generator | int | None = None,
) -> SyntheticDataset:
    """Corrupt a clean dataset: dense noise, then sparse errors, then erasures.

    Noise (when ``spec.snr_db`` is set) is i.i.d. Gaussian with standard
    deviation ``10**(-snr_db/20)`` times the RMS of the clean entries.
    Errors add standard normal values at positions drawn with ``p_err``.
    Erasures, applied last so the affected entries end exactly zero, zero
    out positions drawn with ``p_ers`` and mark them ``kappa`` in the
    weight mask. Error positions may coincide with erasures, in which
    case the erasure wins.

    If ``rng`` is omitted, randomness comes from ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed if rng is None else rng)
    Y = ds.Y.copy()
    shape = Y.shape

    if spec.snr_db is not None:
        rms = float(np.sqrt(np.mean(ds.Y**2)))
        noise_std = 10.0 ** (-spec.snr_db / 20.0) * rms
        Y += noise_std * rng.standard_normal(shape)

    error_mask = rng.random(shape) < spec.p_err
    error_values = np.where(error_mask, rng.standard_normal(shape), 0.0)
    Y += error_values

    erasure_mask = rng.random(shape) < spec.p_ers
    Y[erasure_mask] = 0.0
    weights = np.ones(shape)
    weights[erasure_mask] = spec.kappa

    return SyntheticDataset(
        Y=Y,
        labels=ds.labels.copy(),
        weights=weights,
        true_errors=error_values,
        erasure_mask=erasure_mask,
        error_mask=error_mask,
        theta_deg=ds.theta_deg,
        num_subspaces=ds.num_subspaces,
        kappa=spec.kappa,
        seed=spec.seed,
        p_err=spec.p_err,
        p_ers=spec.p_ers,
        snr_db=spec.snr_db,
    )


def generate_dataset(
    theta_deg: float,
    p_err: float = 0.0,
    p_ers: float = 0.0,
    snr_db: float | None = None,
    seed: int | None = None,
    per_subspace: int = DEFAULT_PER_SUBSPACE,
    ambient_dim: int = DEFAULT_AMBIENT_DIM,
    kappa: float = DEFAULT_KAPPA,
) -> SyntheticDataset:
    """One-stop generator: bases, points and corruption from a single seed."""
    rng = np.random.default_rng(seed)
    model = build_bases(theta_deg, rng, ambient_dim)
    ds = sample_points(model, per_subspace, rng)
    spec = CorruptionSpec(p_err=p_err, p_ers=p_ers, snr_db=snr_db, kappa=kappa)
    ds = inject_corruption(ds, spec, rng)
    ds.seed = seed
    return ds


def save_dataset(ds: SyntheticDataset, directory: str) -> None:
    """Write a dataset directory: Y.csv, labels.csv, lambda.csv, manifest.txt.

    Y.csv and lambda.csv hold one matrix row per line with comma-separated
    decimal text; labels.csv holds one integer label per line.
    """
    os.makedirs(directory, exist_ok=True)
    np.savetxt(os.path.join(directory, "Y.csv"), ds.Y, delimiter=",", fmt="%.17g")
    np.savetxt(os.path.join(directory, "labels.csv"), ds.labels, fmt="%d")
    np.savetxt(
        os.path.join(directory, "lambda.csv"), ds.weights, delimiter=",", fmt="%.17g"
    )
    manifest = {
        "D": ds.ambient_dim,
        "N": ds.num_points,
        "K": ds.num_subspaces,
        "theta": ds.theta_deg,
        "p_err": ds.p_err,
        "p_ers": ds.p_ers,
        "snr_db": "none" if ds.snr_db is None else ds.snr_db,
        "seed": "none" if ds.seed is None else ds.seed,
        "kappa": ds.kappa,
    }
    with open(os.path.join(directory, MANIFEST_NAME), "w") as fh:
        for key, value in manifest.items():
            fh.write(f"{key}={value}\n")


def load_dataset(directory: str) -> SyntheticDataset:
    """Read a dataset directory written by :func:`save_dataset`.

    Only Y, labels, the weight mask and the manifest are persisted;
    ground-truth corruption positions are not, so the loaded
    ``true_errors``/``error_mask`` are empty and ``erasure_mask`` is
    reconstructed from the weight mask.
    """
    manifest = {}
    with open(os.path.join(directory, MANIFEST_NAME)) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                key, _, value = line.partition("=")
                manifest[key.strip()] = value.strip()

    Y = np.loadtxt(os.path.join(directory, "Y.csv"), delimiter=",", ndmin=2)
    labels = np.loadtxt(os.path.join(directory, "labels.csv"), dtype=int, ndmin=1)
    weights = np.loadtxt(os.path.join(directory, "lambda.csv"), delimiter=",", ndmin=2)

    def opt_float(key):
        raw = manifest.get(key, "none")
        return None if raw == "none" else float(raw)

    seed_raw = manifest.get("seed", "none")
    return SyntheticDataset(
        Y=Y,
        labels=labels,
        weights=weights,
        true_errors=np.zeros_like(Y),
        erasure_mask=weights != 1.0,
        error_mask=np.zeros(Y.shape, dtype=bool),
        theta_deg=float(manifest["theta"]),
        num_subspaces=int(manifest["K"]),
        kappa=float(manifest.get("kappa", DEFAULT_KAPPA)),
        seed=None if seed_raw == "none" else int(seed_raw),
        p_err=float(manifest.get("p_err", 0.0)),
        p_ers=float(manifest.get("p_ers", 0.0)),
        snr_db=opt_float("snr_db"),
    )

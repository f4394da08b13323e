"""Spectral clustering of the self-expression coefficient graph.

The coefficient matrix C becomes a symmetric non-negative affinity
W = |C| + |C^T|. Vertices are embedded with the eigenvectors belonging to
the K smallest eigenvalues of the random-walk graph Laplacian
L = I - Dg^-1 W (computed through the symmetric normalization for
numerical robustness and rescaled back), then grouped by k-means with
k-means++ seeding and multiple restarts. Fixed seeds give identical
labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

KMEANS_RESTARTS = 20
KMEANS_MAX_ITERS = 300


@dataclass
class ClusterResult:
    labels: np.ndarray
    embedding: np.ndarray
    eigenvalues: np.ndarray  # of the random-walk Laplacian, ascending
    inertia: float
    isolated: list[int] = field(default_factory=list)


def build_affinity(C: np.ndarray) -> np.ndarray:
    """Symmetric non-negative affinity |C| + |C^T| from a square coefficient matrix."""
    C = np.asarray(C)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("coefficient matrix must be square")
    return np.abs(C) + np.abs(C.T)


def random_walk_embedding(
    W: np.ndarray, num_components: int
) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """Eigenvectors of the random-walk Laplacian for its smallest eigenvalues.

    Solves the symmetric eigenproblem on Dg^-1/2 W Dg^-1/2 and maps the
    eigenvectors back through Dg^-1/2, which reproduces the eigenvectors
    of I - Dg^-1 W while keeping the decomposition symmetric. Zero-degree
    vertices are excluded from the normalization (their embedding rows
    come out zero) and reported as isolated.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    degrees = W.sum(axis=1)
    isolated = np.flatnonzero(degrees == 0)
    safe = np.where(degrees > 0, degrees, 1.0)
    inv_sqrt = 1.0 / np.sqrt(safe)

    sym = inv_sqrt[:, None] * W * inv_sqrt[None, :]
    sym = 0.5 * (sym + sym.T)
    with threadpool_limits(limits=1, user_api="blas"):
        eigvals, eigvecs = np.linalg.eigh(sym)

    # Largest eigenvalues of the normalized adjacency correspond to the
    # smallest of the Laplacian.
    take = eigvecs[:, n - num_components :]
    embedding = inv_sqrt[:, None] * take[:, ::-1]
    laplacian_eigvals = 1.0 - eigvals[::-1]
    return embedding, laplacian_eigvals, isolated.tolist()


def _kmeans_pp_init(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = np.sum((points - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:  # all points coincide with a chosen center
            idx = rng.integers(n)
        centers[i] = points[idx]
        closest = np.minimum(closest, np.sum((points - centers[i]) ** 2, axis=1))
    return centers


def _lloyd(points, centers, max_iters, tol=1e-12):
    k = centers.shape[0]
    labels = None
    for _ in range(max_iters):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = new_labels == j
            if members.any():
                new_centers[j] = points[members].mean(axis=0)
            else:
                # Re-seed an empty cluster at the point farthest from its center.
                worst = d2[np.arange(len(points)), new_labels].argmax()
                new_centers[j] = points[worst]
                new_labels[worst] = j
        shift = float(np.abs(new_centers - centers).max())
        centers, labels = new_centers, new_labels
        if shift <= tol:
            break
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    inertia = float(d2[np.arange(len(points)), labels].sum())
    return labels, centers, inertia


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int | np.random.SeedSequence | None = None,
    n_restarts: int = KMEANS_RESTARTS,
    max_iters: int = KMEANS_MAX_ITERS,
) -> tuple[np.ndarray, float]:
    """k-means with k-means++ seeding, best of ``n_restarts`` by inertia.

    Each restart draws from an independent stream spawned off ``seed``,
    so results are reproducible and restarts could run concurrently.
    """
    points = np.asarray(points, dtype=float)
    if k < 1 or points.shape[0] < k:
        raise ValueError("need at least k points to form k clusters")
    streams = np.random.SeedSequence(seed).spawn(n_restarts)
    best_labels, best_inertia = None, np.inf
    for stream in streams:
        rng = np.random.default_rng(stream)
        centers = _kmeans_pp_init(points, k, rng)
        labels, _, inertia = _lloyd(points, centers, max_iters)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels, best_inertia


def cluster(
    W: np.ndarray,
    num_clusters: int,
    seed: int | None = None,
    n_restarts: int = KMEANS_RESTARTS,
) -> ClusterResult:
    """Partition the affinity graph into ``num_clusters`` groups.

    Isolated vertices (zero degree) carry no graph information; after
    k-means they are reassigned the label of the nearest non-isolated
    vertex in embedding space and reported in the result.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if W.shape != (n, n):
        raise ValueError("affinity matrix must be square")
    if np.any(W < 0):
        raise ValueError("affinity entries must be non-negative")
    if not (1 <= num_clusters <= n):
        raise ValueError("need 1 <= num_clusters <= number of vertices")

    embedding, eigenvalues, isolated = random_walk_embedding(W, num_clusters)

    if len(isolated) == n:
        # No edges anywhere: a single degenerate group.
        return ClusterResult(
            labels=np.zeros(n, dtype=int),
            embedding=embedding,
            eigenvalues=eigenvalues,
            inertia=0.0,
            isolated=isolated,
        )

    labels, inertia = kmeans(embedding, num_clusters, seed, n_restarts)

    if isolated:
        regular = np.setdiff1d(np.arange(n), isolated)
        for i in isolated:
            d2 = ((embedding[regular] - embedding[i]) ** 2).sum(axis=1)
            labels[i] = labels[regular[d2.argmin()]]

    return ClusterResult(
        labels=labels.astype(int),
        embedding=embedding,
        eigenvalues=eigenvalues,
        inertia=inertia,
        isolated=isolated,
    )

import numpy as np
import pytest

from gssc.metrics import misclassification
from gssc.solver import normalize_columns, solve
from gssc.spectral import build_affinity, cluster, kmeans, random_walk_embedding


def block_affinity(sizes, within=1.0, rng=None):
    """Disconnected blocks with uniform (or jittered) positive weights."""
    n = sum(sizes)
    W = np.zeros((n, n))
    start = 0
    for s in sizes:
        block = np.full((s, s), within)
        if rng is not None:
            block += 0.1 * rng.random((s, s))
            block = 0.5 * (block + block.T)
        W[start : start + s, start : start + s] = block
        start += s
    np.fill_diagonal(W, 0.0)
    return W


def block_labels(sizes):
    out = []
    for i, s in enumerate(sizes):
        out.extend([i] * s)
    return np.array(out)


class TestBuildAffinity:
    def test_zero_coefficients(self):
        assert np.all(build_affinity(np.zeros((4, 4))) == 0.0)

    def test_symmetrization(self):
        C = np.zeros((3, 3))
        C[0, 1] = 2.0
        W = build_affinity(C)
        assert W[0, 1] == 2.0
        assert W[1, 0] == 2.0
        assert np.array_equal(W, W.T)

    def test_block_structure_preserved(self, rng):
        C = np.zeros((6, 6))
        C[:3, :3] = rng.standard_normal((3, 3))
        C[3:, 3:] = rng.standard_normal((3, 3))
        W = build_affinity(C)
        assert np.all(W[:3, 3:] == 0.0)
        assert np.all(W[3:, :3] == 0.0)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            build_affinity(np.zeros((3, 4)))


class TestEmbedding:
    def test_eigenvalue_range_and_component_count(self, rng):
        W = block_affinity([5, 7, 6], rng=rng)
        _, eigvals, _ = random_walk_embedding(W, 3)
        assert np.all(eigvals > -1e-10)
        full = random_walk_embedding(W, W.shape[0])[1]
        assert np.all(full > -1e-10)
        assert np.all(full < 2.0 + 1e-10)
        assert int((np.abs(full) < 1e-10).sum()) == 3  # one zero per component

    def test_isolated_vertices_reported(self):
        W = block_affinity([4, 4])
        W[3, :] = 0.0
        W[:, 3] = 0.0
        _, _, isolated = random_walk_embedding(W, 2)
        assert isolated == [3]


class TestKmeans:
    def test_deterministic_under_seed(self, rng):
        pts = rng.standard_normal((40, 3))
        a, ia = kmeans(pts, 4, seed=5)
        b, ib = kmeans(pts, 4, seed=5)
        assert np.array_equal(a, b)
        assert ia == ib

    def test_recovers_separated_blobs(self, rng):
        pts = np.vstack(
            [rng.standard_normal((20, 2)) * 0.05 + center for center in ([0, 0], [5, 5], [-5, 5])]
        )
        labels, _ = kmeans(pts, 3, seed=1)
        truth = block_labels([20, 20, 20])
        assert misclassification(labels, truth, 3).rate == 0.0

    def test_needs_enough_points(self):
        with pytest.raises(ValueError):
            kmeans(np.zeros((2, 2)), 3, seed=0)


class TestCluster:
    def test_three_disconnected_blocks_exact(self, rng):
        sizes = [10, 15, 12]
        W = block_affinity(sizes, rng=rng)
        out = cluster(W, 3, seed=0)
        assert misclassification(out.labels, block_labels(sizes), 3).rate == 0.0

    def test_complete_graph_single_cluster(self):
        W = np.ones((8, 8))
        np.fill_diagonal(W, 0.0)
        out = cluster(W, 1, seed=0)
        assert np.all(out.labels == 0)

    def test_determinism(self, rng):
        W = block_affinity([8, 9, 7], rng=rng)
        a = cluster(W, 3, seed=42).labels
        b = cluster(W, 3, seed=42).labels
        assert np.array_equal(a, b)

    def test_permutation_equivariance(self, rng):
        sizes = [9, 8, 10]
        W = block_affinity(sizes, rng=rng)
        truth = block_labels(sizes)
        perm = rng.permutation(sum(sizes))
        W_p = W[np.ix_(perm, perm)]
        base = cluster(W, 3, seed=3).labels
        permuted = cluster(W_p, 3, seed=3).labels
        # same partition up to cluster renaming
        assert misclassification(permuted, truth[perm], 3).rate == 0.0
        assert misclassification(base, truth, 3).rate == 0.0

    def test_scale_invariance(self, rng):
        W = block_affinity([6, 6, 6], rng=rng)
        a = cluster(W, 3, seed=9).labels
        b = cluster(4.0 * W, 3, seed=9).labels
        assert np.array_equal(a, b)

    def test_isolated_vertex_assigned_and_reported(self, rng):
        sizes = [6, 6]
        W = block_affinity(sizes, rng=rng)
        W[2, :] = 0.0
        W[:, 2] = 0.0
        out = cluster(W, 2, seed=0)
        assert out.isolated == [2]
        assert 0 <= out.labels[2] < 2
        # the connected points still split into the two blocks
        keep = np.array([i for i in range(12) if i != 2])
        assert (
            misclassification(out.labels[keep], block_labels(sizes)[keep], 2).rate == 0.0
        )

    def test_all_isolated_degenerates_to_single_group(self):
        out = cluster(np.zeros((5, 5)), 2, seed=0)
        assert np.all(out.labels == 0)
        assert out.isolated == [0, 1, 2, 3, 4]

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            cluster(np.zeros((3, 4)), 2)
        with pytest.raises(ValueError):
            cluster(-np.ones((4, 4)), 2)
        with pytest.raises(ValueError):
            cluster(np.ones((4, 4)), 5)

    def test_end_to_end_clean_dataset(self, clean_ds60):
        res = solve(normalize_columns(clean_ds60.Y))
        out = cluster(build_affinity(res.C), 3, seed=7)
        assert misclassification(out.labels, clean_ds60.labels, 3).rate == 0.0

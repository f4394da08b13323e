import os

import numpy as np
import pytest

from gssc.synthetic import (
    CorruptionSpec,
    build_bases,
    generate_dataset,
    inject_corruption,
    load_dataset,
    sample_points,
    save_dataset,
    smallest_angle_cos,
)


def dense_search_max_correlation(basis_a, basis_b, samples=200_000, seed=0):
    """Independent oracle: max correlation between the two spans by random search.

    For each sampled unit coefficient vector a, the best partner in the
    other span has correlation ||basis_b^T basis_a a|| (orthonormal bases),
    so only one side needs sampling.
    """
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((basis_a.shape[1], samples))
    coeffs /= np.linalg.norm(coeffs, axis=0)
    cross = basis_b.T @ (basis_a @ coeffs)
    return float(np.linalg.norm(cross, axis=0).max())


class TestBuildBases:
    def test_orthonormal_columns(self):
        model = build_bases(30.0, rng=1)
        for basis in model.bases:
            gram = basis.T @ basis
            assert np.abs(gram - np.eye(4)).max() < 1e-10

    def test_theta60_smallest_angle(self):
        model = build_bases(60.0, rng=3)
        analytic = smallest_angle_cos(model.bases[0], model.bases[1])
        assert abs(analytic - 0.5) < 1e-10
        searched = dense_search_max_correlation(model.bases[0], model.bases[1])
        assert searched <= analytic + 1e-12
        assert abs(searched - 0.5) < 2e-3

    @pytest.mark.parametrize("theta", [5.0, 17.5, 45.0, 60.0])
    def test_angle_matches_request(self, theta):
        model = build_bases(theta, rng=5)
        got = smallest_angle_cos(model.bases[0], model.bases[1])
        assert abs(got - np.cos(np.deg2rad(theta))) < 1e-10

    def test_theta0_common_line(self):
        model = build_bases(0.0, rng=2)
        lead = [b[:, 0] for b in model.bases]
        assert np.allclose(lead[0], lead[1], atol=1e-12)
        assert np.allclose(lead[1], lead[2], atol=1e-12)
        stacked = np.hstack(model.bases)
        rank = np.linalg.matrix_rank(stacked, tol=1e-8)
        assert rank == 7

    def test_third_space_inside_sum_of_others(self):
        model = build_bases(60.0, rng=4)
        union = np.hstack([model.bases[0], model.bases[1]])
        proj = union @ np.linalg.lstsq(union, model.bases[2], rcond=None)[0]
        assert np.abs(proj - model.bases[2]).max() < 1e-10

    def test_rejects_out_of_range_theta(self):
        with pytest.raises(ValueError):
            build_bases(90.0)
        with pytest.raises(ValueError):
            build_bases(-1.0)

    def test_rejects_small_ambient_dim(self):
        with pytest.raises(ValueError):
            build_bases(30.0, ambient_dim=10)


class TestSamplePoints:
    def test_counts_and_labels(self):
        model = build_bases(60.0, rng=1)
        ds = sample_points(model, per_subspace=35, rng=2)
        assert ds.Y.shape == (50, 105)
        assert np.array_equal(np.bincount(ds.labels), [35, 35, 35])

    def test_block_rank_equals_subspace_dim(self):
        model = build_bases(60.0, rng=1)
        ds = sample_points(model, per_subspace=35, rng=2)
        for l in range(3):
            block = ds.Y[:, ds.labels == l]
            assert np.linalg.matrix_rank(block, tol=1e-8) == 4

    def test_deterministic(self):
        model = build_bases(60.0, rng=1)
        a = sample_points(model, 35, rng=9)
        b = sample_points(model, 35, rng=9)
        assert np.array_equal(a.Y, b.Y)
        assert np.array_equal(a.labels, b.labels)

    def test_points_lie_in_a_four_dim_span(self):
        model = build_bases(25.0, rng=8)
        ds = sample_points(model, per_subspace=10, rng=8)
        # Each label block sits in a 4-dim span (the rotated subspace):
        # its rank-4 SVD truncation reproduces it to within round-off.
        for l in range(3):
            cols = ds.Y[:, ds.labels == l]
            u = np.linalg.svd(cols, full_matrices=False)[0][:, :4]
            recon = u @ (u.T @ cols)
            assert np.abs(cols - recon).max() < 1e-8

    def test_rotation_preserves_column_norms(self):
        model = build_bases(60.0, rng=3)
        rng = np.random.default_rng(77)
        coeffs = [rng.standard_normal((4, 35)) for _ in range(3)]
        raw = np.hstack([b @ g for b, g in zip(model.bases, coeffs)])
        ds = sample_points(model, 35, rng=77)
        assert np.abs(
            np.linalg.norm(ds.Y, axis=0) - np.linalg.norm(raw, axis=0)
        ).max() < 1e-10


class TestInjectCorruption:
    def test_identity_when_disabled(self, clean_ds60):
        out = inject_corruption(clean_ds60, CorruptionSpec(seed=5))
        assert np.array_equal(out.Y, clean_ds60.Y)
        assert np.all(out.weights == 1.0)
        assert not out.erasure_mask.any()
        assert not out.error_mask.any()

    def test_noise_rms_at_20db(self, clean_ds60):
        out = inject_corruption(clean_ds60, CorruptionSpec(snr_db=20.0, seed=11))
        noise = out.Y - clean_ds60.Y
        target = 0.1 * np.sqrt(np.mean(clean_ds60.Y**2))
        got = np.sqrt(np.mean(noise**2))
        assert abs(got - target) / target < 0.05

    def test_erasure_count_binomial(self, clean_ds60):
        n_entries = clean_ds60.Y.size
        mean = 0.4 * n_entries
        three_sigma = 3 * np.sqrt(n_entries * 0.4 * 0.6)
        for seed in range(5):
            out = inject_corruption(clean_ds60, CorruptionSpec(p_ers=0.4, seed=seed))
            count = int(out.erasure_mask.sum())
            assert abs(count - mean) <= three_sigma

    def test_erased_entries_exactly_zero_and_marked(self, clean_ds60):
        spec = CorruptionSpec(p_err=0.2, p_ers=0.3, snr_db=20.0, seed=13)
        out = inject_corruption(clean_ds60, spec)
        assert np.all(out.Y[out.erasure_mask] == 0.0)
        assert np.all(out.weights[out.erasure_mask] == spec.kappa)
        assert np.all(out.weights[~out.erasure_mask] == 1.0)

    def test_untouched_entries_bit_identical_without_noise(self, clean_ds60):
        out = inject_corruption(clean_ds60, CorruptionSpec(p_err=0.1, p_ers=0.1, seed=3))
        untouched = ~(out.error_mask | out.erasure_mask)
        assert np.array_equal(out.Y[untouched], clean_ds60.Y[untouched])

    def test_error_values_recorded(self, clean_ds60):
        out = inject_corruption(clean_ds60, CorruptionSpec(p_err=0.1, seed=21))
        pure_errors = out.error_mask & ~out.erasure_mask
        assert np.allclose(
            out.Y[pure_errors] - clean_ds60.Y[pure_errors], out.true_errors[pure_errors]
        )
        assert np.all(out.true_errors[~out.error_mask] == 0.0)

    def test_determinism(self, clean_ds60):
        spec = CorruptionSpec(p_err=0.1, p_ers=0.2, snr_db=15.0, seed=31)
        a = inject_corruption(clean_ds60, spec)
        b = inject_corruption(clean_ds60, spec)
        assert np.array_equal(a.Y, b.Y)
        assert np.array_equal(a.weights, b.weights)

    def test_invalid_probability_rejected(self):
        with pytest.raises(ValueError):
            CorruptionSpec(p_err=1.5)
        with pytest.raises(ValueError):
            CorruptionSpec(p_ers=-0.1)


class TestDatasetIO:
    def test_roundtrip(self, tmp_path, corrupted_ds60):
        path = os.path.join(tmp_path, "ds")
        save_dataset(corrupted_ds60, path)
        back = load_dataset(path)
        assert np.array_equal(back.Y, corrupted_ds60.Y)
        assert np.array_equal(back.labels, corrupted_ds60.labels)
        assert np.array_equal(back.weights, corrupted_ds60.weights)
        assert back.theta_deg == corrupted_ds60.theta_deg
        assert back.num_subspaces == 3
        assert back.snr_db == 20.0
        assert back.seed == corrupted_ds60.seed

    def test_identical_directories_for_same_seed(self, tmp_path):
        dirs = []
        for name in ("a", "b"):
            ds = generate_dataset(45.0, p_err=0.1, p_ers=0.1, seed=77)
            d = os.path.join(tmp_path, name)
            save_dataset(ds, d)
            dirs.append(d)
        for fname in ("Y.csv", "labels.csv", "lambda.csv", "manifest.txt"):
            with open(os.path.join(dirs[0], fname), "rb") as fa, open(
                os.path.join(dirs[1], fname), "rb"
            ) as fb:
                assert fa.read() == fb.read()

    def test_lambda_all_ones_without_erasures(self, tmp_path):
        ds = generate_dataset(30.0, p_err=0.05, seed=5)
        d = os.path.join(tmp_path, "ds")
        save_dataset(ds, d)
        lam = np.loadtxt(os.path.join(d, "lambda.csv"), delimiter=",")
        assert np.all(lam == 1.0)

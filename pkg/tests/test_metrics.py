import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gssc.metrics import (
    TrialRecord,
    aggregate_trials,
    misclassification,
    read_records,
    write_records,
)

label_vectors = st.integers(min_value=2, max_value=4).flatmap(
    lambda k: st.tuples(
        st.just(k),
        st.lists(st.integers(min_value=0, max_value=k - 1), min_size=k, max_size=40),
    )
)


def brute_force_rate(pred, truth, k):
    """Independent oracle: enumerate every permutation explicitly."""
    n = len(truth)
    best = 0
    for perm in permutations(range(k)):
        correct = sum(1 for p, t in zip(pred, truth) if perm[p] == t)
        best = max(best, correct)
    return 1.0 - best / n


class TestMisclassification:
    def test_identical_labels(self):
        truth = np.array([0, 1, 2, 0, 1, 2])
        assert misclassification(truth, truth, 3).rate == 0.0

    def test_renamed_labels_score_zero(self):
        truth = np.array([0, 0, 1, 1, 2, 2])
        renamed = np.array([2, 2, 0, 0, 1, 1])
        res = misclassification(renamed, truth, 3)
        assert res.rate == 0.0
        assert res.best_permutation == (1, 2, 0)

    def test_two_cluster_example(self):
        truth = np.array([0, 0, 1, 1])
        pred = np.array([0, 1, 1, 1])
        assert misclassification(pred, truth, 2).rate == 0.25

    def test_hungarian_path_matches_enumeration(self, rng):
        k = 8  # above the brute-force cutoff
        truth = rng.integers(0, k, size=60)
        pred = rng.integers(0, k, size=60)
        got = misclassification(pred, truth, k)
        assert got.rate == pytest.approx(brute_force_rate(pred, truth, k), abs=1e-12)

    def test_confusion_counts(self):
        truth = np.array([0, 0, 1, 1])
        pred = np.array([0, 1, 1, 1])
        res = misclassification(pred, truth, 2)
        assert res.confusion.tolist() == [[1, 0], [1, 2]]

    @given(label_vectors)
    @settings(max_examples=100, deadline=None)
    def test_invariant_under_simultaneous_relabeling(self, kv):
        k, labels = kv
        labels = np.array(labels)
        pred = labels[::-1].copy()
        base = misclassification(pred, labels, k).rate
        perm = np.roll(np.arange(k), 1)
        assert misclassification(perm[pred], perm[labels], k).rate == base

    @given(label_vectors, st.integers(0, 2**31 - 1))
    @settings(max_examples=100, deadline=None)
    def test_pigeonhole_bound_balanced(self, kv, seed):
        k, _ = kv
        rng = np.random.default_rng(seed)
        truth = np.repeat(np.arange(k), 5)
        pred = rng.integers(0, k, size=truth.size)
        assert misclassification(pred, truth, k).rate <= (k - 1) / k + 1e-12

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(ValueError):
            misclassification([0, 1], [0, 1, 2], 3)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            misclassification([0, 3], [0, 1], 3)


def record(rate, **kw):
    defaults = dict(
        theta_deg=60.0,
        p_err=0.05,
        p_ers=0.15,
        snr_db=20.0,
        algorithm="gssc",
        greedy_iters=5,
        trial_seed=1,
        misclassification=rate,
    )
    defaults.update(kw)
    return TrialRecord(**defaults)


class TestAggregate:
    def test_single_record(self):
        out = aggregate_trials([record(0.125)])
        assert len(out) == 1
        assert out[0].mean == 0.125
        assert math.isnan(out[0].sd)
        assert out[0].count == 1

    def test_two_rates_mean_and_sd(self):
        out = aggregate_trials([record(0.0, trial_seed=1), record(0.1, trial_seed=2)])
        assert out[0].mean == pytest.approx(0.05)
        assert out[0].sd == pytest.approx(np.std([0.0, 0.1], ddof=1))

    def test_cells_keyed_by_all_parameters(self):
        recs = [
            record(0.1),
            record(0.2, greedy_iters=4),
            record(0.3, algorithm="ssc", greedy_iters=0),
            record(0.4, snr_db=None),
        ]
        out = aggregate_trials(recs)
        assert len(out) == 4

    def test_mean_within_input_range(self, rng):
        rates = rng.random(25)
        recs = [record(r, trial_seed=i) for i, r in enumerate(rates)]
        out = aggregate_trials(recs)
        assert rates.min() <= out[0].mean <= rates.max()

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate_trials([])


class TestRecordIO:
    def test_roundtrip_bit_exact(self, tmp_path):
        recs = [
            record(1.0 / 3.0, seconds=0.1234, solver_iters=88),
            record(0.0, snr_db=None, trial_seed=2**63 - 1),
        ]
        path = tmp_path / "rows.csv"
        write_records(recs, str(path))
        back = read_records(str(path))
        assert back == recs

import json

import numpy as np
import pytest

from divsample.errors import DegenerateDataError, UsageError
from divsample.features import pairwise_distance
from divsample.subsample import (
    SelectionResult,
    fps,
    kmeans,
    kmeans_representatives,
    knn_density_weights,
    make_sampler,
    random_subset,
    uniformization,
    weighted_sample_without_replacement,
)
from oracles import fps_greedy, knn_weights_bruteforce, min_dist_sequence

LINE = np.array([[0.0], [1.0], [9.0], [10.0]])


class TestFps:
    def test_single_pick_is_seeded_start(self):
        for seed in range(5):
            r = fps(LINE, 1, seed=seed)
            assert len(r) == 1
            assert r.indices == fps(LINE, 1, seed=seed).indices

    def test_hand_trace(self):
        assert fps(LINE, 3, l=4, first=0).indices == [0, 3, 1]

    def test_distance_matrix_input(self):
        dm = pairwise_distance(LINE)
        assert fps(dm, 3, first=0).indices == [0, 3, 1]

    def test_l_restricts_pool(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((50, 2))
        r = fps(x, 5, l=10, seed=11)
        assert r.params["l"] == 10
        again = fps(x, 10, l=10, seed=11)
        # the whole pool is exhausted at n == l, and the pool is seed-determined
        assert set(r.indices) <= set(again.indices)

    def test_errors(self):
        with pytest.raises(UsageError):
            fps(LINE, 3, l=2)
        with pytest.raises(UsageError):
            fps(LINE, 2, l=5)
        with pytest.raises(UsageError):
            fps(LINE, 0)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_oracle_and_monotone(self, seed):
        rng = np.random.default_rng(seed)
        n_total = int(rng.integers(2, 31))
        x = rng.standard_normal((n_total, int(rng.integers(1, 4))))
        n = int(rng.integers(1, n_total + 1))
        r = fps(x, n, seed=seed)
        pts = x.tolist()
        assert r.indices == fps_greedy(pts, r.indices[0], n)
        seq = min_dist_sequence(pts, r.indices)
        assert all(a >= b for a, b in zip(seq, seq[1:]))


class TestKMeans:
    def test_every_point_its_own_cluster(self):
        x = np.random.default_rng(0).standard_normal((7, 2))
        assert sorted(kmeans_representatives(x, 7, seed=1).indices) == list(range(7))

    def test_hand_computation(self):
        x = np.array([[0.0], [0.1], [10.0], [10.1]])
        for seed in range(10):
            assert sorted(kmeans_representatives(x, 2, seed=seed).indices) == [0, 2]

    @pytest.mark.parametrize("seed", range(10))
    def test_objective_nonincreasing(self, seed):
        rng = np.random.default_rng(seed)
        x = np.vstack([rng.standard_normal((40, 3)) + c for c in rng.uniform(-6, 6, (4, 3))])
        fit = kmeans(x, 6, seed=seed)
        h = fit.objective_history
        assert all(b <= a + 1e-9 * a for a, b in zip(h, h[1:]))
        assert fit.converged

    def test_duplicates_do_not_break(self):
        x = np.vstack([np.zeros((5, 2)), np.ones((5, 2))])
        r = kmeans_representatives(x, 4, seed=0)
        assert len(set(r.indices)) == 4

    def test_n_too_large(self):
        with pytest.raises(UsageError):
            kmeans_representatives(LINE, 5)


class TestKnnWeights:
    def test_hand_computation(self):
        w = knn_density_weights(np.array([[0.0], [1.0], [2.0], [10.0]]), 2)
        np.testing.assert_allclose(w.rho, [2, 1, 2, 9])
        np.testing.assert_allclose(w.weights, np.array([2, 1, 2, 9]) / 14, rtol=1e-15)
        assert w.dim_used == 1 and w.k == 2

    def test_regular_simplex(self):
        x = np.eye(5)
        for k in range(1, 5):
            np.testing.assert_allclose(knn_density_weights(x, k).weights, 0.2, rtol=1e-12)

    def test_two_equal_clusters(self):
        x = np.array([[0.0], [0.1], [0.2], [100.0], [100.1], [100.2]])
        w = knn_density_weights(x, 2).weights
        # end points have rho = 0.2, middle points rho = 0.1
        np.testing.assert_allclose(w[:3], w[3:], rtol=1e-9)
        np.testing.assert_allclose(w, np.array([2, 1, 2, 2, 1, 2]) / 10, rtol=1e-9)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_bruteforce(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 51))
        x = rng.standard_normal((n, int(rng.integers(1, 5))))
        k = int(rng.integers(1, n))
        rho, w = knn_weights_bruteforce(x.tolist(), k)
        got = knn_density_weights(x, k)
        np.testing.assert_allclose(got.rho, rho, rtol=0, atol=1e-12)
        np.testing.assert_allclose(got.weights, w, rtol=0, atol=1e-12)

    def test_permutation_and_scale(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((30, 3))
        perm = rng.permutation(30)
        base = knn_density_weights(x, 4).weights
        np.testing.assert_allclose(knn_density_weights(x[perm], 4).weights, base[perm], atol=1e-14)
        np.testing.assert_allclose(knn_density_weights(7.5 * x, 4).weights, base, rtol=1e-10)

    def test_errors(self):
        with pytest.raises(UsageError):
            knn_density_weights(LINE, 4)
        with pytest.raises(UsageError):
            knn_density_weights(LINE, 0)
        with pytest.raises(DegenerateDataError):
            knn_density_weights(np.zeros((5, 2)), 2)

    def test_large_dimension_no_overflow(self):
        x = np.random.default_rng(0).standard_normal((20, 400)) * 50
        w = knn_density_weights(x, 3).weights
        assert np.all(np.isfinite(w)) and w.sum() == pytest.approx(1, abs=1e-12)


class TestWeightedSampling:
    def test_point_mass(self):
        assert weighted_sample_without_replacement([1, 0, 0], 1, seed=4) == [0]

    def test_zero_weight_never_drawn(self):
        for seed in range(20):
            assert set(weighted_sample_without_replacement([0.5, 0.5, 0], 2, seed)) == {0, 1}

    def test_exhaustion(self):
        w = [0.1, 0, 0.3, 0.6, 0]
        assert sorted(weighted_sample_without_replacement(w, 3, seed=2)) == [0, 2, 3]

    def test_insufficient_mass(self):
        with pytest.raises(DegenerateDataError):
            weighted_sample_without_replacement([1, 0], 2)

    def test_first_draw_frequencies(self):
        w = np.array([0.1, 0.2, 0.7])
        counts = np.bincount([weighted_sample_without_replacement(w, 1, s)[0] for s in range(4000)], minlength=3)
        np.testing.assert_allclose(counts / 4000, w, atol=0.03)


class TestUniformization:
    def test_tau_one_exhausts(self):
        x = np.array([[0.0], [1.0], [2.0], [10.0]])
        assert sorted(uniformization(x, 4, k=2, tau=1.0, seed=3).indices) == [0, 1, 2, 3]

    def test_tau_drops_outliers(self):
        rng = np.random.default_rng(0)
        core = rng.normal(0, 0.1, (20, 2))
        outliers = rng.uniform(-1, 1, (20, 2)) * 1000 + 100 * np.sign(rng.uniform(-1, 1, (20, 2)))
        x = np.vstack([core, outliers])
        for seed in range(10):
            r = uniformization(x, 10, k=3, tau=0.5, seed=seed)
            assert max(r.indices) < 20

    def test_errors(self):
        with pytest.raises(UsageError):
            uniformization(LINE, 1, k=2, tau=0.0)
        with pytest.raises(UsageError):
            uniformization(LINE, 3, k=2, tau=0.5)


class TestRandomSubset:
    def test_exhaustion(self):
        assert sorted(random_subset(6, 6, seed=1).indices) == list(range(6))

    def test_singleton(self):
        assert random_subset(1, 1, seed=9).indices == [0]

    def test_determinism(self):
        assert random_subset(5, 100, seed=42).indices == random_subset(5, 100, seed=42).indices

    def test_too_many(self):
        with pytest.raises(UsageError):
            random_subset(3, 2)


@pytest.mark.parametrize("method", ["fps", "kmeans", "uniformization", "random"])
def test_determinism_and_contract(method):
    x = np.random.default_rng(8).standard_normal((60, 3))
    sampler = make_sampler(method)
    a, b = sampler(x, 6, 123), sampler(x, 6, 123)
    assert a == b
    assert len(a) == 6 and len(set(a.indices)) == 6
    assert all(0 <= i < 60 for i in a.indices)


def test_selection_json_round_trip():
    r = fps(LINE, 2, first=0)
    d = json.loads(r.to_json())
    assert set(d) == {"method", "seed", "params", "indices"}
    assert SelectionResult.from_dict(d) == r


def test_selection_rejects_duplicates():
    with pytest.raises(ValueError):
        SelectionResult([1, 1], "x", 0)


def test_seed_range():
    with pytest.raises(UsageError):
        random_subset(1, 2, seed=-1)
    assert random_subset(1, 2, seed=2**64 - 1).indices[0] in (0, 1)

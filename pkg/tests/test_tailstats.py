import numpy as np
import pytest

from divsample.errors import DegenerateDataError, UsageError
from divsample.tailstats import (
    first_pc_kurtosis,
    fit_two_gaussian_mixture_1d,
    gaussian_kurtosis_baseline,
    histogram,
    kurtosis,
)


def two_mode_cloud(rng, n=100, dim=25, minority=0.02, separation=10.0):
    """Isotropic unit Gaussian with a fixed minority shifted along a random direction."""
    x = rng.standard_normal((n, dim))
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    x[: int(round(minority * n))] += separation * direction
    return x


class TestKurtosis:
    def test_two_point(self):
        assert kurtosis(np.tile([1.0, -1.0], 50)).kurtosis == pytest.approx(1.0, abs=1e-14)

    def test_normal(self):
        x = np.random.default_rng(0).standard_normal(10**6)
        assert 2.95 <= kurtosis(x).kurtosis <= 3.05

    def test_uniform(self):
        x = np.random.default_rng(1).uniform(0, 1, 10**6)
        assert 1.78 <= kurtosis(x).kurtosis <= 1.82

    def test_report_fields(self):
        r = kurtosis([1.0, 2.0, 3.0, 4.0])
        assert r.n == 4 and r.mean == 2.5 and r.variance == pytest.approx(1.25)

    def test_errors(self):
        with pytest.raises(DegenerateDataError):
            kurtosis(np.full(10, 0.1))
        with pytest.raises(UsageError):
            kurtosis([1.0, 2.0, 3.0])

    @pytest.mark.parametrize("seed", range(20))
    def test_lower_bound(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_cauchy(int(rng.integers(4, 200)))
        assert kurtosis(x).kurtosis >= 1 - 1e-12


class TestFirstPcKurtosis:
    def test_gaussian(self):
        x = np.random.default_rng(2).standard_normal((10**5, 5))
        assert 2.9 <= first_pc_kurtosis(x).kurtosis <= 3.1

    def test_two_mode_heavy_tail(self):
        assert first_pc_kurtosis(two_mode_cloud(np.random.default_rng(3))).kurtosis > 5

    @pytest.mark.parametrize("seed", range(5))
    def test_orthogonal_and_scale_invariance(self, seed):
        rng = np.random.default_rng(seed)
        x = two_mode_cloud(rng, n=60, dim=6)
        q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        base = first_pc_kurtosis(x).kurtosis
        assert first_pc_kurtosis(x @ q).kurtosis == pytest.approx(base, abs=1e-8)
        assert first_pc_kurtosis(3.7 * x).kurtosis == pytest.approx(base, abs=1e-8)


class TestBaseline:
    def test_dimension_twenty_five(self):
        stats = gaussian_kurtosis_baseline(25, 100, 800, seed=0)
        assert stats.fraction_above[5.0] <= 0.01
        assert len(stats.kurtoses) == 800

    def test_one_dimensional_median(self):
        stats = gaussian_kurtosis_baseline(1, 100, 200, seed=1)
        assert 2.4 <= stats.percentiles[50] <= 3.4

    def test_single_trial(self):
        stats = gaussian_kurtosis_baseline(3, 20, 1, seed=5)
        assert len(set(stats.percentiles.values())) == 1
        assert stats.percentiles[50] == stats.kurtoses[0]

    def test_percentiles_sorted_and_deterministic(self):
        a = gaussian_kurtosis_baseline(4, 30, 50, seed=9)
        b = gaussian_kurtosis_baseline(4, 30, 50, seed=9)
        assert a == b
        vals = [a.percentiles[p] for p in (5, 25, 50, 75, 95)]
        assert vals == sorted(vals)

    def test_trial_seeding_is_order_free(self):
        a = gaussian_kurtosis_baseline(4, 30, 10, seed=100)
        b = gaussian_kurtosis_baseline(4, 30, 5, seed=105)
        assert a.kurtoses[5:] == b.kurtoses


class TestTwoGaussianFit:
    def test_single_gaussian(self):
        x = np.random.default_rng(4).standard_normal(10**4)
        fit = fit_two_gaussian_mixture_1d(x)
        assert -0.1 <= fit.means[0] <= 0.1
        assert 0.9 <= fit.stds[0] <= 1.1
        assert fit.merged and fit.weights == (1.0, 0.0)

    def test_unmerged_split_still_available(self):
        x = np.random.default_rng(4).standard_normal(10**4)
        fit = fit_two_gaussian_mixture_1d(x, merge_unresolved=False)
        assert not fit.merged and fit.weights[1] > 0.3

    def test_imbalanced_mixture(self):
        rng = np.random.default_rng(5)
        n = 10**4
        comp = rng.uniform(size=n) < 0.02
        x = np.where(comp, 10.0, 0.0) + rng.standard_normal(n)
        fit = fit_two_gaussian_mixture_1d(x)
        assert fit.weights[0] == pytest.approx(0.98, abs=0.02)
        assert fit.weights[1] == pytest.approx(0.02, abs=0.02)
        assert fit.means[0] == pytest.approx(0.0, abs=0.2)
        assert fit.means[1] == pytest.approx(10.0, abs=0.2)
        assert sum(fit.weights) == pytest.approx(1, abs=1e-10)
        assert fit.weights[0] >= fit.weights[1]
        assert not fit.merged

    def test_constant(self):
        with pytest.raises(DegenerateDataError):
            fit_two_gaussian_mixture_1d(np.full(20, 3.0))

    @pytest.mark.parametrize("seed", range(8))
    def test_log_likelihood_monotone(self, seed):
        rng = np.random.default_rng(seed)
        x = np.concatenate([rng.normal(0, 1, 300), rng.normal(rng.uniform(1, 8), rng.uniform(0.2, 2), 40)])
        h = fit_two_gaussian_mixture_1d(x).log_likelihood_history
        assert all(b >= a - 1e-10 for a, b in zip(h, h[1:]))


def test_histogram():
    rows = histogram([0.0, 0.5, 1.0, 1.0], 2)
    assert [r[2] for r in rows] == [1, 3]
    assert rows[0][0] == 0.0 and rows[-1][1] == 1.0

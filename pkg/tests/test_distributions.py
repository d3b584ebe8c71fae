import numpy as np
import pytest

from crowdpareto.distributions import (
    PriceDistribution,
    daily_rates,
    rates_histogram,
    social_histogram_distribution,
)
from crowdpareto.errors import DegenerateRate, EmptyHistogram, InsufficientHistory

from oracles import enumerate_rate_terminals, tv_distance_binned


class TestSocialHistogram:
    def test_counting(self):
        d = social_histogram_distribution([10.0, 10.0, 20.0], n_bins=2)
        np.testing.assert_allclose(d.densities, [2 / 3, 1 / 3])
        np.testing.assert_allclose(d.values, [10.0, 20.0])

    def test_identical_prices_point_mass(self):
        d = social_histogram_distribution([42.0, 42.0, 42.0])
        assert d.is_point_mass
        assert d.densities.tolist() == [1.0]
        assert d.values.tolist() == [42.0]
        width = d.bin_edges[1] - d.bin_edges[0]
        assert width == pytest.approx(1e-9 * 42.0, rel=1e-6)

    def test_large_sample_mean_close_to_sample_mean(self):
        rng = np.random.default_rng(7)
        prices = 1000.0 + rng.standard_normal(10_000)
        d = social_histogram_distribution(prices, n_bins=50)
        se = prices.std(ddof=0) / np.sqrt(prices.size)
        assert abs(d.mean - prices.mean()) <= 3 * se

    def test_empty_histogram(self):
        with pytest.raises(EmptyHistogram):
            social_histogram_distribution([])

    def test_random_inputs_always_valid(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 200))
            prices = np.exp(rng.normal(4.5, 0.3, n))
            d = social_histogram_distribution(prices, n_bins=int(rng.integers(1, 80)))
            assert abs(d.densities.sum() - 1.0) <= 1e-9
            assert np.all(np.diff(d.bin_edges) > 0)
            assert np.all(d.bin_edges > 0)
            assert d.bin_edges[0] <= d.values.min()
            assert d.values.max() <= d.bin_edges[-1]


class TestRatesHistogram:
    def test_constant_series_point_mass(self):
        d = rates_histogram([100.0] * 10, horizon_days=5, n_paths=500, seed=0)
        assert d.is_point_mass
        assert d.values.tolist() == [100.0]

    def test_single_rate_compounding(self):
        # one rate r = 1/11, so one day compounds 110 -> 121 exactly
        d = rates_histogram([100.0, 110.0], horizon_days=1, n_paths=200, seed=1)
        assert d.is_point_mass
        assert d.mean == pytest.approx(121.0, rel=1e-12)

    def test_mean_matches_enumeration(self):
        closes = [100.0]
        for r in (0.01, -0.01):
            closes.append(closes[-1] / (1 - r))
        d = rates_histogram(closes, horizon_days=5, n_paths=100_000, seed=9)
        exact = enumerate_rate_terminals(closes, 5)
        exact_mean = sum(p * w for p, w in exact.items())
        assert abs(d.mean - exact_mean) / exact_mean <= 0.005

    def test_total_variation_converges(self):
        closes = [100.0]
        for r in (0.013, -0.007, 0.002):
            closes.append(closes[-1] / (1 - r))
        exact = enumerate_rate_terminals(closes, 4)
        d = rates_histogram(closes, horizon_days=4, n_paths=200_000, seed=2)
        assert tv_distance_binned(d, exact) < 0.02

    def test_deterministic_under_seed(self):
        closes = [100.0, 101.0, 99.5, 102.0]
        a = rates_histogram(closes, 3, 5_000, seed=11)
        b = rates_histogram(closes, 3, 5_000, seed=11)
        c = rates_histogram(closes, 3, 5_000, seed=12)
        np.testing.assert_array_equal(a.densities, b.densities)
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.array_equal(a.densities, c.densities) or not np.array_equal(a.values, c.values)

    def test_rate_definition(self):
        rates = daily_rates([100.0, 110.0, 99.0])
        np.testing.assert_allclose(rates, [(110 - 100) / 110, (99 - 110) / 99])

    def test_degenerate_rate(self):
        with pytest.raises(DegenerateRate):
            daily_rates([-1.0, 1.0])

    def test_insufficient_history(self):
        with pytest.raises(InsufficientHistory):
            rates_histogram([100.0], 1, 10, seed=0)


class TestPriceDistributionInvariants:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            PriceDistribution([1.0, 2.0], [0.5], [1.5])

    def test_rejects_negative_density(self):
        with pytest.raises(ValueError):
            PriceDistribution([1.0, 2.0, 3.0], [1.5, -0.5], [1.5, 2.5])

    def test_rejects_nonpositive_edges(self):
        with pytest.raises(ValueError):
            PriceDistribution([0.0, 1.0], [1.0], [0.5])

    def test_moments(self):
        d = PriceDistribution([1.0, 2.0, 3.0], [0.25, 0.75], [1.5, 2.5])
        assert d.mean == pytest.approx(0.25 * 1.5 + 0.75 * 2.5)
        var = 0.25 * (1.5 - d.mean) ** 2 + 0.75 * (2.5 - d.mean) ** 2
        assert d.std == pytest.approx(np.sqrt(var))

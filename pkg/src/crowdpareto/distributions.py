"""Binned probability distributions over asset prices.

Two constructions are provided: binning the peer predictions shown to a
forecaster, and extrapolating a price history forward by resampling its
empirical daily rates of change.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRate, EmptyHistogram, InsufficientHistory

# Width assigned to a bin holding a single repeated value, relative to
# that value.  Keeps point masses representable without zero-width bins.
POINT_MASS_REL_WIDTH = 1e-9

DEFAULT_BINS = 50


@dataclass(frozen=True, eq=False)
class PriceDistribution:
    """A normalized distribution over prices.

    ``values`` holds the representative price of each bin (the unique
    price for per-value bins, the midpoint for equal-width bins); the
    probability mass of bin ``j`` sits at ``values[j]``.
    """

    bin_edges: np.ndarray
    densities: np.ndarray
    values: np.ndarray
    source: str = "social"

    def __post_init__(self):
        object.__setattr__(self, "bin_edges", np.asarray(self.bin_edges, dtype=float))
        object.__setattr__(self, "densities", np.asarray(self.densities, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.densities.size < 1 or self.bin_edges.size != self.densities.size + 1:
            raise ValueError("need n_bins >= 1 and len(bin_edges) == n_bins + 1")
        if self.values.size != self.densities.size:
            raise ValueError("values and densities must align")
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if np.any(self.bin_edges <= 0):
            raise ValueError("bin edges must be positive prices")
        if np.any(self.densities < 0):
            raise ValueError("densities must be non-negative")
        if abs(self.densities.sum() - 1.0) > 1e-9:
            raise ValueError("densities must sum to 1 within 1e-9")

    @property
    def n_bins(self) -> int:
        return self.densities.size

    @property
    def mean(self) -> float:
        return float(self.densities @ self.values)

    @property
    def std(self) -> float:
        m = self.mean
        return float(np.sqrt(self.densities @ (self.values - m) ** 2))

    @property
    def is_point_mass(self) -> bool:
        return self.n_bins == 1


def _from_samples(samples: np.ndarray, n_bins: int, source: str) -> PriceDistribution:
    """Bin samples, using one bin per unique value when few enough.

    Per-value bins keep small discrete histograms (peer predictions,
    enumerable rate paths) exact; larger samples fall back to ``n_bins``
    equal-width bins over the sample range.
    """
    uniques, counts = np.unique(samples, return_counts=True)
    if uniques.size <= n_bins:
        densities = counts / counts.sum()
        if uniques.size == 1:
            v = uniques[0]
            half = 0.5 * POINT_MASS_REL_WIDTH * v
            edges = np.array([v - half, v + half])
        else:
            mids = 0.5 * (uniques[:-1] + uniques[1:])
            lo = max(uniques[0] - 0.5 * (uniques[1] - uniques[0]), 0.5 * uniques[0])
            hi = uniques[-1] + 0.5 * (uniques[-1] - uniques[-2])
            edges = np.concatenate([[lo], mids, [hi]])
        return PriceDistribution(edges, densities, uniques, source)
    counts, edges = np.histogram(samples, bins=n_bins)
    mids = 0.5 * (edges[:-1] + edges[1:])
    return PriceDistribution(edges, counts / counts.sum(), mids, source)


def social_histogram_distribution(histogram, n_bins: int = DEFAULT_BINS) -> PriceDistribution:
    """Distribution over the peer predictions shown to a forecaster."""
    prices = np.asarray(histogram, dtype=float)
    if prices.size == 0:
        raise EmptyHistogram("social histogram is empty")
    if np.any(prices <= 0):
        raise ValueError("histogram prices must be positive")
    return _from_samples(prices, n_bins, "social")


def daily_rates(closes) -> np.ndarray:
    """Daily rates of price change, r_t = (B_t - B_{t-1}) / B_t."""
    closes = np.asarray(closes, dtype=float)
    if closes.size < 2:
        raise InsufficientHistory("need at least 2 closes to compute rates")
    rates = (closes[1:] - closes[:-1]) / closes[1:]
    if np.any(rates >= 1.0):
        raise DegenerateRate("daily rate >= 1 implies a non-positive close")
    return rates


def rates_histogram(
    closes,
    horizon_days: int,
    n_paths: int,
    seed: int,
    n_bins: int = DEFAULT_BINS,
) -> PriceDistribution:
    """Monte Carlo price distribution from resampled daily rates.

    Each path draws ``horizon_days`` rates i.i.d. uniformly from the
    empirical rate set and compounds forward from the last close with
    the per-day multiplier 1 / (1 - r), the exact inverse of the rate
    definition.  Deterministic for a given seed.
    """
    if horizon_days < 1:
        raise ValueError("horizon_days must be >= 1")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    closes = np.asarray(closes, dtype=float)
    rates = daily_rates(closes)
    multipliers = 1.0 / (1.0 - rates)
    rng = np.random.default_rng(seed)
    draws = multipliers[rng.integers(0, multipliers.size, size=(n_paths, horizon_days))]
    # Sort within each path so equal rate multisets compound to
    # bit-identical terminal prices (products commute mathematically).
    draws.sort(axis=1)
    terminal = closes[-1] * np.prod(draws, axis=1)
    return _from_samples(terminal, n_bins, "rates")

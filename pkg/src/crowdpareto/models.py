"""Belief-update models: how a forecaster revises a prediction after
seeing peer predictions and the asset's price history.

Six models are provided, each predicting the revised belief from a
prediction set:

* ``GaussianSocial``  - normal prior and likelihood, peer histogram as
  evidence; posterior mean (b_pre + mean(histogram)) / 2.
* ``GaussianPrice``   - same update with the rates-extrapolated price
  distribution as evidence.
* ``GaussianSocialModes`` - as GaussianSocial, but when the peer
  histogram fails a dip test of unimodality the largest mode replaces
  the histogram mean.
* ``NumericalSocial`` / ``NumericalPrice`` - no parametric assumption on
  the evidence: the posterior is the binned likelihood reweighted by a
  normal prior centered on b_pre.
* ``DeGroot``         - weighted average of peer beliefs with equal
  trust, the classic social-learning baseline.

All models are parameter-free in the statistical sense (nothing is
fitted); estimator classes exist so the models compose with scikit-learn
style tooling (``get_params``, cloning, pipelines over arrays of
prediction sets).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .dataset import PredictionSet
from .distributions import (
    DEFAULT_BINS,
    PriceDistribution,
    rates_histogram,
    social_histogram_distribution,
)
from .diptest import dip_test
from .errors import ConfigInvalid, EmptyHistogram, NonPositivePrice, ZeroPosteriorMass
from .seeding import derive_seed

# Prior densities below this are treated as numerically zero when the
# whole likelihood support is that unlikely under the prior.
_MIN_PRIOR_DENSITY = 1e-300
_LOG_MIN_PRIOR_DENSITY = math.log(_MIN_PRIOR_DENSITY)


@dataclass(frozen=True)
class MonteCarloConfig:
    """Knobs for every Monte Carlo step in the model family."""

    n_paths: int = 10_000       # rate-resampling paths per price extrapolation
    n_samples: int = 2_000      # rejection-sampling draws per posterior
    seed: int = 0
    rates_bins: int = DEFAULT_BINS
    social_bins: int = DEFAULT_BINS
    dip_n_null: int = 2_000     # uniform-null replicates for the dip test

    def __post_init__(self):
        if self.n_paths < 1 or self.n_samples < 1:
            raise ConfigInvalid("n_paths and n_samples must be >= 1")
        if self.rates_bins < 1 or self.social_bins < 1:
            raise ConfigInvalid("bin counts must be >= 1")


DEFAULT_MC = MonteCarloConfig()


@dataclass(frozen=True, eq=False)
class PosteriorEstimate:
    """A model's prediction of the revised belief.

    ``mean`` is the exact posterior mean; ``samples`` optionally retains
    Monte Carlo draws whose average must sit within ``mc_tolerance`` of
    the exact mean (declared in ``diagnostics``).
    """

    model: str
    mean: float
    samples: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.mean > 0:
            raise NonPositivePrice(f"posterior mean = {self.mean}")
        if self.samples is not None:
            sample_mean = float(np.mean(self.samples))
            tol = self.diagnostics.get("mc_tolerance", np.inf)
            if abs(self.mean - sample_mean) > tol:
                raise ValueError(
                    f"sampled mean {sample_mean} departs from exact mean "
                    f"{self.mean} by more than the MC tolerance {tol}"
                )


def residual(posterior, b_post: float) -> float:
    """Signed relative residual (model mean - b_post) / b_post."""
    if not b_post > 0:
        raise NonPositivePrice(f"b_post = {b_post}")
    mean = posterior.mean if isinstance(posterior, PosteriorEstimate) else float(posterior)
    return (mean - b_post) / b_post


def _histogram(pset: PredictionSet) -> np.ndarray:
    if len(pset.social_histogram) == 0:
        raise EmptyHistogram("prediction set has an empty social histogram",
                             record_id=pset.id)
    return np.asarray(pset.social_histogram, dtype=float)


def gaussian_social(pset: PredictionSet) -> PosteriorEstimate:
    """Posterior mean (b_pre + mean(histogram)) / 2.

    The equal weighting follows from normal prior and likelihood with
    identical information content.
    """
    hist = _histogram(pset)
    return PosteriorEstimate("GaussianSocial", (pset.b_pre + float(hist.mean())) / 2.0)


def gaussian_price(
    pset: PredictionSet,
    horizon_days: int,
    mc: MonteCarloConfig = DEFAULT_MC,
    evidence: str = "rates",
) -> PosteriorEstimate:
    """Posterior mean (b_pre + mean(price evidence)) / 2.

    The evidence distribution extrapolates the shown price history
    ``horizon_days`` forward by rate resampling.  ``evidence="prices"``
    is a sensitivity alternative that uses the raw mean of the shown
    closes instead of the rates extrapolation.
    """
    if evidence == "rates":
        dist = rates_histogram(
            pset.price_history.closes_array,
            horizon_days,
            mc.n_paths,
            derive_seed(mc.seed, "rates", pset.id),
            n_bins=mc.rates_bins,
        )
        m = dist.mean
    elif evidence == "prices":
        m = float(pset.price_history.closes_array.mean())
    else:
        raise ConfigInvalid(f"evidence must be 'rates' or 'prices', got {evidence!r}")
    return PosteriorEstimate("GaussianPrice", (pset.b_pre + m) / 2.0)


def _largest_mode(hist: np.ndarray) -> float:
    """Highest-count unique value; ties go to the value nearest the mean."""
    uniques, counts = np.unique(hist, return_counts=True)
    best = counts == counts.max()
    candidates = uniques[best]
    return float(candidates[np.argmin(np.abs(candidates - hist.mean()))])


def gaussian_social_modes(
    pset: PredictionSet,
    dip_alpha: float = 0.05,
    n_null: int = 2_000,
    seed: int = 0,
) -> PosteriorEstimate:
    """GaussianSocial with multimodality handling.

    When a dip test rejects unimodality of the peer histogram (at
    ``dip_alpha``), the largest mode stands in for the histogram mean.
    Histograms too small to test (< 4 entries) count as unimodal.
    """
    hist = _histogram(pset)
    evidence = float(hist.mean())
    dip_p = None
    if hist.size >= 4:
        result = dip_test(hist, n_null=n_null, seed=derive_seed(seed, "dip", pset.id))
        dip_p = result.p_value
        if result.p_value < dip_alpha:
            evidence = _largest_mode(hist)
    return PosteriorEstimate(
        "GaussianSocialModes",
        (pset.b_pre + evidence) / 2.0,
        diagnostics={"dip_p_value": dip_p},
    )


def degroot(pset: PredictionSet, self_weight: float = 1.0) -> PosteriorEstimate:
    """Equal-trust weighted average of peer beliefs and one's own prior.

    With ``self_weight`` equal to the number of peers this reproduces
    GaussianSocial exactly.
    """
    if self_weight < 0:
        raise ConfigInvalid("self_weight must be non-negative")
    hist = _histogram(pset)
    # Convex-combination form: with self_weight == len(hist) the weight
    # is exactly 0.5 and the result is bit-identical to GaussianSocial.
    w = self_weight / (self_weight + hist.size)
    return PosteriorEstimate("DeGroot", w * pset.b_pre + (1.0 - w) * float(hist.mean()))


def numerical_posterior(
    prior_mean: float,
    prior_std: float,
    likelihood: PriceDistribution,
    n_samples: int,
    seed: int,
    keep_samples: bool = True,
    model: str = "Numerical",
) -> PosteriorEstimate:
    """Discrete posterior over likelihood bins under a normal prior.

    Bin ``j`` gets weight density_j * NormalPDF(value_j; prior_mean,
    prior_std), normalized.  ``mean`` is the exact bin-weighted average;
    a rejection sampler (propose from the likelihood, accept with
    probability pdf(value) / max-over-bins pdf) provides draws for
    diagnostics and downstream resampling.

    Raises :class:`ZeroPosteriorMass` when the prior density is below
    1e-300 at every bin, i.e. the supports are effectively disjoint.
    """
    if not prior_std > 0:
        raise ConfigInvalid("prior_std must be positive")
    if n_samples < 1:
        raise ConfigInvalid("n_samples must be >= 1")

    values = likelihood.values
    if likelihood.is_point_mass:
        # A single evidence value pins the posterior regardless of prior.
        v = float(values[0])
        samples = np.full(n_samples, v) if keep_samples else None
        return PosteriorEstimate(
            model, v, samples=samples,
            diagnostics={"acceptance_rate": 1.0, "sample_mean": v,
                         "sample_se": 0.0, "mc_tolerance": 0.0},
        )

    z = (values - prior_mean) / prior_std
    log_pdf = -0.5 * z * z - math.log(prior_std * math.sqrt(2.0 * math.pi))
    if log_pdf.max() < _LOG_MIN_PRIOR_DENSITY:
        raise ZeroPosteriorMass(
            "prior density underflows at every likelihood bin "
            f"(prior_mean={prior_mean}, prior_std={prior_std})"
        )
    with np.errstate(divide="ignore"):  # zero-density bins are legal
        log_w = np.log(likelihood.densities) + log_pdf
    log_w -= log_w.max()
    weights = np.exp(log_w)
    weights /= weights.sum()
    exact_mean = float(weights @ values)

    # Rejection sampling with the tightest constant envelope over the
    # discrete support: accept with pdf(value) / max_bins pdf, which
    # targets the same posterior as any looser normal-pdf bound but
    # stays usable when the prior concentrates between bins.
    accept_p = np.exp(log_pdf - log_pdf.max())
    expected_rate = float(likelihood.densities @ accept_p)
    rng = np.random.default_rng(seed)
    drawn = []
    n_accepted = 0
    n_proposed = 0
    budget = max(10_000_000, 1_000 * n_samples)
    while n_accepted < n_samples:
        if n_proposed >= budget:
            raise ZeroPosteriorMass(
                f"rejection sampler acceptance too low ({expected_rate:.3g}) "
                f"after {n_proposed} proposals"
            )
        want = n_samples - n_accepted
        batch = min(budget - n_proposed,
                    max(int(want / max(expected_rate, 1e-6) * 1.2), 1_024))
        idx = rng.choice(values.size, size=batch, p=likelihood.densities)
        keep = rng.random(batch) < accept_p[idx]
        drawn.append(values[idx[keep]])
        n_accepted += int(keep.sum())
        n_proposed += batch
    samples = np.concatenate(drawn)[:n_samples]

    sample_mean = float(samples.mean())
    sample_se = float(samples.std(ddof=0) / math.sqrt(n_samples))
    # Declared Monte Carlo band: 6 sigma of the empirical se plus the
    # worst-case shift from low-weight bins the draw may have missed
    # entirely (each is seen w.h.p. once its weight exceeds ~20/n).
    span = float(values.max() - values.min())
    unseen = span * min(1.0, 20.0 * values.size / n_samples)
    diagnostics = {
        "acceptance_rate": n_samples / n_proposed,
        "sample_mean": sample_mean,
        "sample_se": sample_se,
        "mc_tolerance": 6.0 * sample_se + unseen + 1e-9 * abs(exact_mean),
    }
    return PosteriorEstimate(
        model, exact_mean,
        samples=samples if keep_samples else None,
        diagnostics=diagnostics,
    )


def numerical_social(
    pset: PredictionSet,
    mc: MonteCarloConfig = DEFAULT_MC,
    keep_samples: bool = False,
) -> PosteriorEstimate:
    """Numerical posterior with the peer histogram as likelihood.

    The prior is normal with mean b_pre and the histogram's standard
    deviation; a degenerate (zero-spread) histogram collapses the
    posterior to its single value.
    """
    hist = _histogram(pset)
    likelihood = social_histogram_distribution(hist, n_bins=mc.social_bins)
    prior_std = float(hist.std(ddof=0))
    if prior_std == 0.0:
        prior_std = 1e-9 * float(hist[0])
    return numerical_posterior(
        pset.b_pre, prior_std, likelihood,
        mc.n_samples, derive_seed(mc.seed, "numsocial", pset.id),
        keep_samples=keep_samples, model="NumericalSocial",
    )


def numerical_price(
    pset: PredictionSet,
    horizon_days: int,
    mc: MonteCarloConfig = DEFAULT_MC,
    keep_samples: bool = False,
) -> PosteriorEstimate:
    """Numerical posterior with the rates-extrapolated price distribution
    as likelihood; the prior spread is that distribution's own std."""
    likelihood = rates_histogram(
        pset.price_history.closes_array,
        horizon_days,
        mc.n_paths,
        derive_seed(mc.seed, "rates", pset.id),
        n_bins=mc.rates_bins,
    )
    prior_std = likelihood.std
    if prior_std == 0.0:
        prior_std = 1e-9 * likelihood.mean
    return numerical_posterior(
        pset.b_pre, prior_std, likelihood,
        mc.n_samples, derive_seed(mc.seed, "numprice", pset.id),
        keep_samples=keep_samples, model="NumericalPrice",
    )


# ---------------------------------------------------------------------------
# estimator layer


def check_prediction_sets(X) -> list:
    """Validate and normalize an array-like of prediction sets."""
    sets = list(X)
    if not sets:
        raise ValueError("X must contain at least one prediction set")
    for item in sets:
        if not isinstance(item, PredictionSet):
            raise TypeError(f"expected PredictionSet, got {type(item).__name__}")
    return sets


class BeliefModel(BaseEstimator):
    """Base class for the model family.

    The models carry no fitted state; ``fit`` only validates its input.
    ``predict`` maps prediction sets to posterior means.
    """

    model_name: str = "BeliefModel"

    def fit(self, X, y=None):
        check_prediction_sets(X)
        return self

    def estimate(self, pset: PredictionSet) -> PosteriorEstimate:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return np.array([self.estimate(p).mean for p in check_prediction_sets(X)])

    def residuals(self, X) -> np.ndarray:
        """Signed relative residuals against the observed revised beliefs."""
        return np.array([residual(self.estimate(p), p.b_post)
                         for p in check_prediction_sets(X)])


class GaussianSocial(BeliefModel):
    model_name = "GaussianSocial"

    def estimate(self, pset):
        return gaussian_social(pset)


class GaussianPrice(BeliefModel):
    model_name = "GaussianPrice"

    def __init__(self, horizon_days=None, evidence="rates", mc=None):
        self.horizon_days = horizon_days
        self.evidence = evidence
        self.mc = mc

    def estimate(self, pset, horizon_days=None):
        horizon = horizon_days if horizon_days is not None else self.horizon_days
        if horizon is None:
            raise ConfigInvalid("horizon_days is required (constructor or call)")
        return gaussian_price(pset, horizon, self.mc or DEFAULT_MC, evidence=self.evidence)


class GaussianSocialModes(BeliefModel):
    model_name = "GaussianSocialModes"

    def __init__(self, dip_alpha=0.05, n_null=2_000, seed=0):
        self.dip_alpha = dip_alpha
        self.n_null = n_null
        self.seed = seed

    def estimate(self, pset):
        return gaussian_social_modes(pset, self.dip_alpha, self.n_null, self.seed)


class NumericalSocial(BeliefModel):
    model_name = "NumericalSocial"

    def __init__(self, mc=None):
        self.mc = mc

    def estimate(self, pset):
        return numerical_social(pset, self.mc or DEFAULT_MC)


class NumericalPrice(BeliefModel):
    model_name = "NumericalPrice"

    def __init__(self, horizon_days=None, mc=None):
        self.horizon_days = horizon_days
        self.mc = mc

    def estimate(self, pset, horizon_days=None):
        horizon = horizon_days if horizon_days is not None else self.horizon_days
        if horizon is None:
            raise ConfigInvalid("horizon_days is required (constructor or call)")
        return numerical_price(pset, horizon, self.mc or DEFAULT_MC)


class DeGroot(BeliefModel):
    model_name = "DeGroot"

    def __init__(self, self_weight=1.0):
        self.self_weight = self_weight

    def estimate(self, pset):
        return degroot(pset, self.self_weight)

"""Social-learning attribution and accuracy-risk Pareto analysis for
crowd forecasts."""

from .attribution import (
    AlphaGrid,
    AlphaRecord,
    build_alpha_grid,
    compute_alpha_records,
    compute_epsilons,
    rescale_alphas,
    select_subset,
)
from .dataset import (
    PredictionSet,
    PriceSeries,
    Round,
    RoundSummary,
    crowd_mean_error,
    futures_mean_error,
    linear_extrapolation_error,
    load_dataset,
    price_change,
    save_dataset,
    summarize,
    validate_dataset,
)
from .diptest import DipResult, dip_statistic, dip_test
from .distributions import PriceDistribution, rates_histogram, social_histogram_distribution
from .models import (
    DEFAULT_MC,
    BeliefModel,
    DeGroot,
    GaussianPrice,
    GaussianSocial,
    GaussianSocialModes,
    MonteCarloConfig,
    NumericalPrice,
    NumericalSocial,
    PosteriorEstimate,
    degroot,
    gaussian_price,
    gaussian_social,
    gaussian_social_modes,
    numerical_posterior,
    numerical_price,
    numerical_social,
    residual,
)
from .pareto import (
    ImprovementSample,
    ParetoPoint,
    bootstrap_analysis,
    bootstrap_improvements,
    improvement,
    loess_smooth,
    pareto_curve,
    subset_error,
    t_confidence_interval,
    window_filter,
)
from .simulate import GbmParams, SimConfig, generate_dataset, simulate_price_path, simulate_round

__version__ = "0.1.0"

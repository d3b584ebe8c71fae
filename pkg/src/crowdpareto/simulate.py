"""Synthetic prediction rounds with known-label Bayesian agents.

A geometric Brownian motion path plays the asset; agents arrive in
random order, observe the histogram of all earlier revised beliefs plus
the trailing price history, and revise their own belief with their
assigned update rule.  Agent ids embed the rule name so attribution
accuracy can be scored against ground truth.
"""

import json
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .dataset import PredictionSet, PriceSeries, Round, save_dataset
from .distributions import rates_histogram
from .errors import ConfigInvalid
from .seeding import derive_rng, derive_seed

AGENT_TYPES = ("social-gaussian", "price-gaussian", "degroot", "random-noise")


@dataclass(frozen=True)
class GbmParams:
    initial_price: float
    drift: float = 0.0       # per day, log scale
    volatility: float = 0.0  # per day

    def __post_init__(self):
        if not self.initial_price > 0:
            raise ConfigInvalid("initial_price must be positive")
        if self.volatility < 0:
            raise ConfigInvalid("volatility must be >= 0")


@dataclass(frozen=True)
class SimConfig:
    n_agents: int
    agent_mix: dict
    gbm: GbmParams
    round_days: int
    history_days: int = 126
    prior_noise_std: float = 0.0
    update_noise_std: float = 0.0
    seed: int = 0
    start_date: date = date(2020, 3, 2)
    asset_symbol: str = "SIM"
    n_rate_paths: int = 2_000   # per price-learning agent

    def __post_init__(self):
        if self.n_agents < 1:
            raise ConfigInvalid("n_agents must be >= 1")
        if self.round_days < 8:
            raise ConfigInvalid("round_days must be >= 8 (one week is held out)")
        if self.history_days < 2:
            raise ConfigInvalid("history_days must be >= 2")
        if self.prior_noise_std < 0 or self.update_noise_std < 0:
            raise ConfigInvalid("noise stds must be >= 0")
        unknown = set(self.agent_mix) - set(AGENT_TYPES)
        if unknown:
            raise ConfigInvalid(f"unknown agent types: {sorted(unknown)}")
        total = sum(self.agent_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigInvalid(f"agent_mix must sum to 1, got {total}")
        if any(v < 0 for v in self.agent_mix.values()):
            raise ConfigInvalid("agent_mix fractions must be >= 0")

    @classmethod
    def from_json(cls, obj: dict) -> "SimConfig":
        try:
            kwargs = dict(obj)
            kwargs["gbm"] = GbmParams(**kwargs["gbm"])
            if "start_date" in kwargs:
                kwargs["start_date"] = date.fromisoformat(kwargs["start_date"])
            return cls(**kwargs)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(f"bad simulation config: {exc}")


def load_sim_configs(path) -> list:
    """Read one SimConfig (object) or several (array) from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = [data]
    return [SimConfig.from_json(obj) for obj in data]


def simulate_price_path(gbm: GbmParams, n_days: int, seed: int) -> np.ndarray:
    """GBM daily closes: n_days steps after the initial price.

    Returns n_days + 1 values with index 0 at ``initial_price`` and
    log-increments drift - volatility^2 / 2 + volatility * Z per day.
    """
    if n_days < 1:
        raise ConfigInvalid("n_days must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n_days)
    increments = (gbm.drift - 0.5 * gbm.volatility**2) + gbm.volatility * z
    log_path = np.concatenate([[0.0], np.cumsum(increments)])
    return gbm.initial_price * np.exp(log_path)


def _agent_types(mix: dict, n: int, rng: np.random.Generator) -> list:
    """Largest-remainder allocation of n agents to types, shuffled."""
    names = [t for t in AGENT_TYPES if mix.get(t, 0.0) > 0.0]
    exact = np.array([mix[t] * n for t in names])
    counts = np.floor(exact).astype(int)
    for i in np.argsort(-(exact - counts))[: n - counts.sum()]:
        counts[i] += 1
    types = [t for t, c in zip(names, counts) for _ in range(c)]
    return [types[i] for i in rng.permutation(n)]


def simulate_round(config: SimConfig, round_id: str = "sim-1") -> Round:
    """One synthetic round satisfying every dataset invariant.

    Agents are strictly sequential within the round (each histogram is
    the earlier agents' revised beliefs); their timestamps all land
    inside the analysis window.
    """
    total_days = config.history_days + config.round_days
    closes = simulate_price_path(config.gbm, total_days,
                                 derive_seed(config.seed, "path", round_id))
    first_day = config.start_date - timedelta(days=config.history_days)
    dates = [first_day + timedelta(days=i) for i in range(total_days + 1)]

    end_date = dates[-1]
    cutoff = end_date - timedelta(days=7)
    ground_truth = float(closes[-1])

    rng = derive_rng(config.seed, "agents", round_id)
    types = _agent_types(config.agent_mix, config.n_agents, rng)

    start_dt = datetime.combine(config.start_date, datetime.min.time(),
                                tzinfo=timezone.utc) + timedelta(hours=9)
    end_dt = datetime.combine(cutoff, datetime.min.time(),
                              tzinfo=timezone.utc) + timedelta(hours=17)
    span = (end_dt - start_dt).total_seconds()
    step = span / max(config.n_agents - 1, 1)

    posts: list = []
    sets: list = []
    for i, agent_type in enumerate(types):
        ts = start_dt + timedelta(seconds=round(i * step))
        day_idx = (ts.date() - first_day).days
        current = float(closes[day_idx])
        history = PriceSeries(
            tuple(dates[day_idx - config.history_days + 1: day_idx + 1]),
            tuple(closes[day_idx - config.history_days + 1: day_idx + 1]),
        )
        b_pre = current * float(np.exp(config.prior_noise_std * rng.standard_normal()))
        histogram = tuple(posts)

        if not histogram and agent_type in ("social-gaussian", "degroot"):
            belief = b_pre  # no evidence yet, keep the prior
        elif agent_type == "social-gaussian":
            belief = (b_pre + float(np.mean(histogram))) / 2.0
        elif agent_type == "degroot":
            belief = (b_pre + sum(histogram)) / (1.0 + len(histogram))
        elif agent_type == "price-gaussian":
            horizon = max((end_date - ts.date()).days, 1)
            dist = rates_histogram(
                history.closes_array, horizon, config.n_rate_paths,
                derive_seed(config.seed, "agentrates", round_id, i),
            )
            belief = (b_pre + dist.mean) / 2.0
        else:  # random-noise
            belief = b_pre

        b_post = belief * float(np.exp(config.update_noise_std * rng.standard_normal()))
        sets.append(PredictionSet(
            id=f"{round_id}:{agent_type}:{i:04d}",
            round_id=round_id,
            timestamp=ts,
            b_pre=b_pre,
            social_histogram=histogram,
            price_history=history,
            b_post=b_post,
        ))
        posts.append(b_post)

    return Round(
        round_id=round_id,
        asset_symbol=config.asset_symbol,
        start_date=config.start_date,
        end_date=end_date,
        ground_truth=ground_truth,
        prediction_sets=tuple(sets),
        analysis_cutoff=cutoff,
    )


def agent_type_of(prediction_set_id: str) -> str:
    """Recover the update rule embedded in a simulated set id."""
    return prediction_set_id.split(":")[1]


def generate_dataset(configs, out_dir) -> Path:
    """Simulate one round per config and write the dataset files.

    Identical configs (seeds included) produce byte-identical files.
    """
    rounds = [simulate_round(cfg, round_id=f"sim-{k + 1}")
              for k, cfg in enumerate(configs)]
    out = Path(out_dir)
    save_dataset(rounds, out)
    return out

"""Attribute each belief revision to social vs. price learning.

For every prediction set, the absolute relative residuals of the two
closed-form models are compared: epsilon_h for the social model,
epsilon_t for the price model.  Their difference alpha = epsilon_t -
epsilon_h is positive when the revision is better explained by social
learning.  Alphas are rescaled per round to [-1, 1] and drive one-sided
subset selection anchored at alpha = 0.
"""

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import EmptyHistogram, InsufficientHistory, TooFewRecords
from .models import DEFAULT_MC, MonteCarloConfig, gaussian_price, gaussian_social, residual


@dataclass(frozen=True)
class AlphaRecord:
    """Per-prediction-set attribution result (epsilons are fractions)."""

    prediction_set_id: str
    round_id: str
    epsilon_h: float
    epsilon_t: float
    alpha_raw: float
    alpha_scaled: float | None = None

    def __post_init__(self):
        if self.epsilon_h < 0 or self.epsilon_t < 0:
            raise ValueError("epsilons are absolute residuals, must be >= 0")
        if self.alpha_raw != self.epsilon_t - self.epsilon_h:
            raise ValueError("alpha_raw must equal epsilon_t - epsilon_h")
        if self.alpha_scaled is not None:
            if not -1.0 <= self.alpha_scaled <= 1.0:
                raise ValueError("alpha_scaled must lie in [-1, 1]")
            if np.sign(self.alpha_scaled) != np.sign(self.alpha_raw):
                raise ValueError("rescaling must preserve sign")


@dataclass(frozen=True)
class AlphaGrid:
    """Ordered one-sided subset boundaries in [-1, 1]."""

    boundaries: tuple

    def __post_init__(self):
        object.__setattr__(self, "boundaries", tuple(float(b) for b in self.boundaries))
        if not self.boundaries:
            raise ValueError("grid must contain at least one boundary")
        for b in self.boundaries:
            if not -1.0 <= b <= 1.0:
                raise ValueError(f"boundary {b} outside [-1, 1]")
        if any(a >= b for a, b in zip(self.boundaries, self.boundaries[1:])):
            raise ValueError("boundaries must be strictly increasing")


def compute_epsilons(
    pset,
    horizon_days: int,
    mc: MonteCarloConfig = DEFAULT_MC,
) -> tuple:
    """Absolute relative residuals of the social and price models."""
    eps_h = abs(residual(gaussian_social(pset), pset.b_post))
    eps_t = abs(residual(gaussian_price(pset, horizon_days, mc), pset.b_post))
    return eps_h, eps_t


def rescale_alphas(records) -> list:
    """Rescale one round's raw alphas into [-1, 1].

    Divides by the round's max |alpha_raw|, which preserves sign and the
    alpha = 0 anchor; an all-zero round maps to all zeros.
    """
    records = list(records)
    if not records:
        return records
    scale = max(abs(r.alpha_raw) for r in records)
    if scale == 0.0:
        return [replace(r, alpha_scaled=0.0) for r in records]
    return [replace(r, alpha_scaled=r.alpha_raw / scale) for r in records]


def compute_alpha_records(
    rounds,
    mc: MonteCarloConfig = DEFAULT_MC,
    horizon_days: int | None = None,
    map_fn=map,
) -> tuple:
    """Attribution records for every analysis-window prediction set.

    ``horizon_days=None`` extrapolates each set to its round's final day.
    Sets lacking the evidence for either model (no social histogram, or a
    price history too short for rates) cannot be attributed and are
    skipped; the skip count is returned alongside the records.

    ``map_fn`` may be a parallel map; results are order-stable because
    every Monte Carlo stream is derived from (seed, set id).
    """
    out = []
    n_skipped = 0

    def one(args):
        pset, horizon = args
        try:
            eps_h, eps_t = compute_epsilons(pset, horizon, mc)
        except (EmptyHistogram, InsufficientHistory):
            return None
        return AlphaRecord(pset.id, pset.round_id, eps_h, eps_t, eps_t - eps_h)

    for round_ in rounds:
        jobs = []
        for pset in round_.analysis_sets:
            horizon = horizon_days
            if horizon is None:
                horizon = max((round_.end_date - pset.timestamp.date()).days, 1)
            jobs.append((pset, horizon))
        round_records = []
        for rec in map_fn(one, jobs):
            if rec is None:
                n_skipped += 1
            else:
                round_records.append(rec)
        out.extend(rescale_alphas(round_records))
    return out, n_skipped


def build_alpha_grid(records, n_bins: int = 15) -> AlphaGrid:
    """Equal-count boundaries over the pooled rescaled alphas.

    Quantile edges of the pooled distribution, snapped so the grid always
    carries the -1 and +1 full-side boundaries and an exact 0 boundary;
    duplicate edges collapse.
    """
    records = list(records)
    if len(records) < n_bins:
        raise TooFewRecords(f"need >= {n_bins} records, got {len(records)}")
    alphas = np.array([r.alpha_scaled for r in records], dtype=float)
    if np.any(np.isnan(alphas)):
        raise ValueError("records must be rescaled before building a grid")
    edges = np.quantile(alphas, np.linspace(0.0, 1.0, n_bins + 1))
    edges[0], edges[-1] = -1.0, 1.0
    if edges.size > 2:
        interior = edges[1:-1]
        interior[np.argmin(np.abs(interior))] = 0.0
    return AlphaGrid(tuple(np.unique(edges)))


def select_subset(records, alpha_s: float) -> tuple:
    """Prediction-set ids in the one-sided alpha interval anchored at 0.

    For alpha_s > 0 the interval is [0, alpha_s), for alpha_s < 0 it is
    (alpha_s, 0]; the outer endpoint closes at alpha_s = +-1 so the full
    one-sided crowds are selectable.  alpha_s = 0 selects exactly the
    alpha = 0 records, which belong to both sides.
    """
    if not -1.0 <= alpha_s <= 1.0:
        raise ValueError(f"alpha_s must lie in [-1, 1], got {alpha_s}")

    def keep(a: float) -> bool:
        if alpha_s > 0:
            return 0.0 <= a < alpha_s or (alpha_s == 1.0 and a == 1.0)
        if alpha_s < 0:
            return alpha_s < a <= 0.0 or (alpha_s == -1.0 and a == -1.0)
        return a == 0.0

    return tuple(r.prediction_set_id for r in records if keep(r.alpha_scaled))


def write_alphas_csv(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["prediction_set_id", "round_id", "epsilon_h", "epsilon_t",
                    "alpha_raw", "alpha_scaled"])
        for r in records:
            w.writerow([r.prediction_set_id, r.round_id,
                        f"{r.epsilon_h:.6g}", f"{r.epsilon_t:.6g}",
                        f"{r.alpha_raw:.6g}", f"{r.alpha_scaled:.6g}"])
